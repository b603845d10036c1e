//! Fixed-antenna MIMO benchmark with the same aperture as the fluid antenna.
//!
//! Every receiver carries `⌊2W⌋ + 1` half-wavelength spaced antennas with
//! independent channels. DRs apply a linear combiner `u_i`; ERs harvest on
//! every element without combining. The loop alternates max-SINR combiners
//! with the same relaxed beamforming solve used for the fluid antenna. The
//! energy objective does not depend on the combiners and a max-SINR update
//! never lowers a DR's SINR, so the previous beams stay feasible and the
//! trace is kept non-decreasing the same way as in [`crate::ao`].

use alloc::vec::Vec;

use crate::ao::{AoError, AoSettings, AoStatus};
use crate::beamforming::{recover_instance, solve_instance, BeamformingError, DataLink, P2Instance};
use crate::channel::{apply_imperfect_csi, generate_estimated_channel, pathloss, ChannelError, CsiPair};
use crate::linalg::{dot_conj, hermitian_eigen, norm_sq, solve_hpd, CMatrix, C64};
use crate::rng::{stream, Population, Purpose, StreamId};
use crate::sysmodel::{leakage_matrix, BeamformingSolution, ModelError, SystemConfig};

/// Elements that fit in an aperture of `w` wavelengths at half-wavelength
/// spacing.
pub fn receive_antennas(w: f64) -> usize {
    if w.is_finite() && w > 0.0 {
        (2.0 * w).floor() as usize + 1
    } else {
        1
    }
}

/// Channels of the benchmark: every link is `M × A` with one column per
/// receive antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoScenario {
    pub dr_links: Vec<CsiPair>,
    pub er_links: Vec<CsiPair>,
}

/// Draws the benchmark channels of one trial. They come from streams of
/// their own, so the fluid-antenna channels of the same trial are unchanged.
pub fn generate_mimo_scenario(trial_seed: u64, cfg: &SystemConfig) -> Result<MimoScenario, ChannelError> {
    cfg.validate()?;
    let link = |population, index: usize, w: f64, rho: f64, distance: f64| -> Result<CsiPair, ChannelError> {
        let gain = pathloss(distance, cfg.pathloss_exponent)?;
        let mut est_rng = stream(trial_seed, StreamId::new(population, index, Purpose::MimoEstimate));
        let est = generate_estimated_channel(&mut est_rng, cfg.tx_antennas, receive_antennas(w), 0.0, gain)?;
        let mut err_rng = stream(trial_seed, StreamId::new(population, index, Purpose::MimoError));
        apply_imperfect_csi(&mut err_rng, est, rho, gain)
    };
    let dr_links = cfg
        .data_receivers
        .iter()
        .enumerate()
        .map(|(i, r)| link(Population::Data, i, r.antenna_size, r.csi_accuracy, r.distance_m))
        .collect::<Result<_, _>>()?;
    let er_links = cfg
        .energy_receivers
        .iter()
        .enumerate()
        .map(|(j, r)| link(Population::Energy, j, r.antenna_size, r.csi_accuracy, r.distance_m))
        .collect::<Result<_, _>>()?;
    Ok(MimoScenario { dr_links, er_links })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MimoResult {
    pub solution: BeamformingSolution,
    /// Unit-norm receive combiner of every DR.
    pub combiners: Vec<Vec<C64>>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub status: AoStatus,
}

impl MimoResult {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }

    pub fn is_feasible(&self) -> bool {
        !matches!(self.status, AoStatus::Infeasible { .. })
    }
}

fn check(scenario: &MimoScenario, cfg: &SystemConfig) -> Result<(), ModelError> {
    if scenario.dr_links.len() != cfg.num_dr() || scenario.er_links.len() != cfg.num_er() {
        return Err(ModelError::Dimension("scenario does not match the configuration"));
    }
    let rows_ok = scenario.dr_links.iter().chain(&scenario.er_links).all(|l| l.estimated.tx_antennas() == cfg.tx_antennas);
    if !rows_ok {
        return Err(ModelError::Dimension("channel rows must equal tx_antennas"));
    }
    Ok(())
}

/// `Σ_j β_j Σ_a (ρ_j² ĝ_ja ĝ_jaᴴ + (1 − ρ_j²) σ_g² I)`.
pub fn mimo_energy_matrix(scenario: &MimoScenario, cfg: &SystemConfig) -> Result<CMatrix, ModelError> {
    check(scenario, cfg)?;
    let m = cfg.tx_antennas;
    let mut s = CMatrix::zeros(m, m);
    for (rx, link) in cfg.energy_receivers.iter().zip(&scenario.er_links) {
        for a in 0..link.estimated.ports() {
            s += &leakage_matrix(link.estimated.port(a), link.rho, link.error_variance).scaled(rx.weight);
        }
    }
    Ok(s)
}

/// Effective channel `Ĥ u` seen through combiner `u`.
pub fn effective_channel(link: &CsiPair, combiner: &[C64]) -> Vec<C64> {
    link.estimated.matrix().mul_vec(combiner)
}

/// Dominant left singular direction of `Ĥ`, the combiner that maximizes
/// the channel gain before any beams are known.
pub fn initial_combiner(link: &CsiPair) -> Vec<C64> {
    let h = link.estimated.matrix();
    hermitian_eigen(&(&h.adjoint() * h)).vector(0).to_vec()
}

/// Max-SINR combiner of DR `dr` for fixed beams.
///
/// With `a = Ĥᴴ w_i` and `B = Ĥᴴ Ψ_i Ĥ + Z I`, where
/// `Z = ((1 − ρ²) σ_h² P_tx + σ²) / ρ²`, the SINR is `ρ²|aᴴu|² / (ρ² uᴴBu)`
/// and is maximized by `u ∝ B⁻¹ a`. Returns `None` when the direction is
/// undefined (no signal or `ρ = 0`).
pub fn max_sinr_combiner(dr: usize, link: &CsiPair, solution: &BeamformingSolution, cfg: &SystemConfig) -> Option<Vec<C64>> {
    let rho2 = link.rho * link.rho;
    if rho2 == 0.0 {
        return None;
    }
    let h = link.estimated.matrix();
    let hh = h.adjoint();
    let a = hh.mul_vec(&solution.w[dr]);
    if norm_sq(&a) == 0.0 {
        return None;
    }
    let z = ((1.0 - rho2) * link.error_variance * solution.total_power() + cfg.data_receivers[dr].noise_power_w) / rho2;
    let mut b = &(&hh * &solution.interference_covariance(dr)) * h;
    for k in 0..b.rows() {
        b[(k, k)] += C64::new(z, 0.0);
    }
    b.symmetrize();
    let u = solve_hpd(&b, &a)?;
    let norm = norm_sq(&u).sqrt();
    (norm > 0.0).then(|| u.iter().map(|x| x / norm).collect())
}

/// SINR of DR `dr` through `combiner` on the estimated channels.
pub fn combined_sinr(dr: usize, link: &CsiPair, combiner: &[C64], solution: &BeamformingSolution, cfg: &SystemConfig) -> f64 {
    let rho2 = link.rho * link.rho;
    let heff = effective_channel(link, combiner);
    let signal = rho2 * dot_conj(&heff, &solution.w[dr]).norm_sqr();
    let floor = (1.0 - rho2) * link.error_variance * solution.total_power() + cfg.data_receivers[dr].noise_power_w;
    let denom = rho2 * solution.interference_covariance(dr).quad_form(&heff) + floor * norm_sq(combiner);
    if denom == 0.0 {
        return if signal > 0.0 { f64::INFINITY } else { 0.0 };
    }
    signal / denom
}

fn data_link(dr: usize, link: &CsiPair, combiner: &[C64], cfg: &SystemConfig) -> DataLink {
    let rx = &cfg.data_receivers[dr];
    let scale = norm_sq(combiner);
    DataLink {
        channel: effective_channel(link, combiner),
        rho: link.rho,
        error_variance: link.error_variance * scale,
        sinr_threshold: rx.sinr_threshold,
        noise_power_w: rx.noise_power_w * scale,
    }
}

fn instance(scenario: &MimoScenario, combiners: &[Vec<C64>], energy: &CMatrix, cfg: &SystemConfig) -> P2Instance {
    let data = scenario.dr_links.iter().zip(combiners).enumerate().map(|(i, (l, u))| data_link(i, l, u, cfg)).collect();
    P2Instance { energy: energy.clone(), data, power_w: cfg.power_w }
}

/// Runs the benchmark loop with settings taken from `cfg`.
pub fn optimize_mimo(scenario: &MimoScenario, cfg: &SystemConfig) -> Result<MimoResult, AoError> {
    optimize_mimo_with(scenario, cfg, &AoSettings::from_config(cfg))
}

pub fn optimize_mimo_with(scenario: &MimoScenario, cfg: &SystemConfig, settings: &AoSettings) -> Result<MimoResult, AoError> {
    check(scenario, cfg)?;
    let energy = mimo_energy_matrix(scenario, cfg)?;
    let solve = |combiners: &[Vec<C64>], iteration: usize| -> Result<Option<BeamformingSolution>, AoError> {
        let wrap = |source| AoError::Beamforming { iteration, source };
        let inst = instance(scenario, combiners, &energy, cfg);
        match solve_instance(&inst, &settings.p2) {
            Ok(p2) => recover_instance(&p2, &inst, &settings.p2).map(Some).map_err(wrap),
            Err(BeamformingError::Infeasible { .. }) => Ok(None),
            Err(e) => Err(wrap(e)),
        }
    };
    let infeasible = |combiners, trace, iteration: usize, solution: Option<BeamformingSolution>| MimoResult {
        solution: solution.unwrap_or_else(|| BeamformingSolution::zero(cfg.num_dr(), cfg.tx_antennas)),
        combiners,
        objective_trace: trace,
        iterations: iteration + 1,
        status: AoStatus::Infeasible { iteration },
    };

    let mut combiners: Vec<Vec<C64>> = scenario.dr_links.iter().map(initial_combiner).collect();
    let mut solution = match solve(&combiners, 0)? {
        Some(s) => s,
        None => return Ok(infeasible(combiners, Vec::new(), 0, None)),
    };
    let mut trace = alloc::vec![solution.objective];
    let max_iterations = settings.max_iterations.max(1);
    let mut status = AoStatus::MaxIterations;
    while trace.len() < max_iterations {
        let next: Vec<Vec<C64>> = scenario
            .dr_links
            .iter()
            .enumerate()
            .map(|(i, l)| max_sinr_combiner(i, l, &solution, cfg).unwrap_or_else(|| combiners[i].clone()))
            .collect();
        let iteration = trace.len();
        // The energy objective ignores combiners, so the incumbent keeps its value.
        let candidate = match solve(&next, iteration)? {
            Some(s) => s,
            None => return Ok(infeasible(next, trace, iteration, Some(solution))),
        };
        if candidate.objective >= solution.objective {
            solution = candidate;
        }
        combiners = next;
        let previous = *trace.last().unwrap_or(&0.0);
        trace.push(solution.objective);
        if solution.objective - previous <= settings.tolerance_w {
            status = AoStatus::Converged;
            break;
        }
    }
    Ok(MimoResult { solution, combiners, iterations: trace.len(), objective_trace: trace, status })
}

/// `Σ_j β_j Σ_a ‖g_ja‖²_Ω` on the true channels, for reporting only.
pub fn realized_mimo_eh(solution: &BeamformingSolution, scenario: &MimoScenario, cfg: &SystemConfig) -> Result<f64, ModelError> {
    check(scenario, cfg)?;
    let omega = solution.transmit_covariance();
    let mut total = 0.0;
    for (rx, link) in cfg.energy_receivers.iter().zip(&scenario.er_links) {
        for a in 0..link.true_channel.ports() {
            total += rx.weight * omega.quad_form(link.true_channel.port(a));
        }
    }
    Ok(total)
}

/// `|uᴴ Ĥᴴ w|²`, the combined gain of beam `w`.
pub fn combined_gain(link: &CsiPair, combiner: &[C64], w: &[C64]) -> f64 {
    dot_conj(&effective_channel(link, combiner), w).norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ao::optimize;
    use crate::beamforming::{solve_p2, P2Settings};
    use crate::channel::generate_scenario;
    use crate::sysmodel::PortSelection;
    use alloc::vec;

    #[test]
    fn antenna_count_from_aperture() {
        assert_eq!(receive_antennas(0.2), 1);
        assert_eq!(receive_antennas(0.5), 2);
        assert_eq!(receive_antennas(0.99), 2);
        assert_eq!(receive_antennas(1.0), 3);
        assert_eq!(receive_antennas(5.0), 11);
        assert_eq!(receive_antennas(0.0), 1);
    }

    #[test]
    fn scenario_shapes_and_independence() {
        let cfg = SystemConfig::default();
        let mimo = generate_mimo_scenario(3, &cfg).unwrap();
        assert!(mimo.dr_links.iter().chain(&mimo.er_links).all(|l| l.estimated.ports() == 2 && l.estimated.tx_antennas() == 4));
        let fa = generate_scenario(3, &cfg).unwrap();
        assert_ne!(fa.dr_links[0].estimated.port(0), mimo.dr_links[0].estimated.port(0));
        assert_eq!(mimo, generate_mimo_scenario(3, &cfg).unwrap());
    }

    #[test]
    fn single_antenna_reduces_to_fixed_port() {
        let cfg = SystemConfig::default().with_ports(1);
        for seed in 0..3 {
            let fa = generate_scenario(seed, &cfg).unwrap();
            let scenario = MimoScenario { dr_links: fa.dr_links.clone(), er_links: fa.er_links.clone() };
            let mimo = optimize_mimo(&scenario, &cfg).unwrap();
            let ao = optimize(&fa, &cfg).unwrap();
            let rel = (mimo.objective() - ao.objective()).abs() / ao.objective();
            assert!(rel <= 1e-6, "{} vs {}", mimo.objective(), ao.objective());
        }
    }

    #[test]
    fn no_data_receivers_is_closed_form() {
        let cfg = SystemConfig::default().with_receivers(0, 2);
        let scenario = generate_mimo_scenario(4, &cfg).unwrap();
        let res = optimize_mimo(&scenario, &cfg).unwrap();
        let s = mimo_energy_matrix(&scenario, &cfg).unwrap();
        let expect = cfg.power_w * hermitian_eigen(&s).max();
        assert!((res.objective() - expect).abs() <= 1e-6 * expect);
    }

    #[test]
    fn combiner_beats_a_grid_of_unit_combiners() {
        let cfg = SystemConfig::default();
        let scenario = generate_mimo_scenario(5, &cfg).unwrap();
        let res = optimize_mimo(&scenario, &cfg).unwrap();
        let sol = &res.solution;
        for (i, link) in scenario.dr_links.iter().enumerate() {
            let u = max_sinr_combiner(i, link, sol, &cfg).unwrap();
            let best = combined_sinr(i, link, &u, sol, &cfg);
            for a in 0..=40 {
                for p in 0..80 {
                    let theta = core::f64::consts::FRAC_PI_2 * a as f64 / 40.0;
                    let phi = core::f64::consts::TAU * p as f64 / 80.0;
                    let v = [C64::new(theta.cos(), 0.0), C64::from_polar(theta.sin(), phi)];
                    assert!(combined_sinr(i, link, &v, sol, &cfg) <= best * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn combined_sinr_is_a_rayleigh_quotient() {
        let cfg = SystemConfig::default().with_csi_accuracy(0.9);
        let scenario = generate_mimo_scenario(6, &cfg).unwrap();
        let res = optimize_mimo(&scenario, &cfg).unwrap();
        let sol = &res.solution;
        for (i, link) in scenario.dr_links.iter().enumerate() {
            let u = &res.combiners[i];
            let rho2 = link.rho * link.rho;
            let hh = link.estimated.matrix().adjoint();
            let a = hh.mul_vec(&sol.w[i]);
            let z = ((1.0 - rho2) * link.error_variance * sol.total_power() + cfg.data_receivers[i].noise_power_w) / rho2;
            let mut b = &(&hh * &sol.interference_covariance(i)) * link.estimated.matrix();
            for k in 0..b.rows() {
                b[(k, k)] += C64::new(z, 0.0);
            }
            let quotient = dot_conj(&a, u).norm_sqr() / b.quad_form(u);
            let sinr = combined_sinr(i, link, u, sol, &cfg);
            assert!((sinr - quotient).abs() <= 1e-10 * quotient);
            assert!(sinr >= cfg.data_receivers[i].sinr_threshold * (1.0 - 1e-6));
        }
    }

    #[test]
    fn benchmark_is_monotone() {
        let cfg = SystemConfig::default().with_csi_accuracy(0.9).with_antenna_size(1.5);
        for seed in 10..13 {
            let scenario = generate_mimo_scenario(seed, &cfg).unwrap();
            let res = optimize_mimo(&scenario, &cfg).unwrap();
            assert!(res.is_feasible());
            assert!(res.iterations <= cfg.max_iterations);
            for pair in res.objective_trace.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-9);
            }
            assert!(res.combiners.iter().all(|u| (norm_sq(u) - 1.0).abs() < 1e-12));
            assert!(realized_mimo_eh(&res.solution, &scenario, &cfg).unwrap() > 0.0);
        }
    }

    #[test]
    fn fixed_port_solve_agrees_with_instance() {
        let cfg = SystemConfig::default().with_ports(1);
        let fa = generate_scenario(7, &cfg).unwrap();
        let ports = PortSelection { dr: vec![0, 0], er: vec![0, 0] };
        let p2 = solve_p2(&ports, &fa, &cfg, &P2Settings::default()).unwrap();
        let scenario = MimoScenario { dr_links: fa.dr_links, er_links: fa.er_links };
        let combiners = vec![vec![C64::new(1.0, 0.0)]; 2];
        let energy = mimo_energy_matrix(&scenario, &cfg).unwrap();
        let inst = instance(&scenario, &combiners, &energy, &cfg);
        let direct = solve_instance(&inst, &P2Settings::default()).unwrap();
        assert!((p2.objective - direct.objective).abs() <= 1e-9 * p2.objective);
    }
}
