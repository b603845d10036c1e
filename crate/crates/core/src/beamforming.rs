//! Semidefinite relaxation of the beamforming subproblem for fixed ports.
//!
//! With `W_i = w_i w_iᴴ` the problem becomes linear in `(W_1, …, W_KD, V_E)`:
//!
//! ```text
//! maximize    Σ_i tr(S W_i) + tr(S V_E)
//! subject to  tr(F_i W_i)/γ_i − Σ_{k≠i} tr(D_i W_k) − tr(D_i V_E) ≥ σ_i²
//!             Σ_i tr(W_i) + tr(V_E) ≤ P,     W_i, V_E ⪰ 0
//! ```
//!
//! and dropping `rank(W_i) = 1` leaves an SDP whose optimal `W_i` are
//! nevertheless rank one, so beamformers are read off the dominant eigenpair.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::channel::ChannelSet;
use crate::linalg::{dot_conj, hermitian_eigen, norm_sq, solve_hpd, CMatrix, RMatrix, C64};
use crate::sdp::{solve, Residuals, SdpConstraint, SdpError, SdpProblem, SdpSettings, SdpStatus, Sense};
use crate::sysmodel::{
    build_s_re, leakage_matrix, signal_matrix, sinr_at_port, weighted_eh, BeamformingSolution, ModelError,
    PortSelection, SystemConfig,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BeamformingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("SINR targets cannot be met with the power budget (certificate residual {certificate:e})")]
    Infeasible { certificate: f64 },
    #[error("SDP solver stopped with status {status:?} (residuals {residuals:?})")]
    Solver { status: SdpStatus, residuals: Residuals },
    #[error("information covariance {block} is not rank one: spectrum {spectrum:?}")]
    RankViolation { block: usize, spectrum: Vec<f64> },
    #[error("recovered beamformer misses the SINR target of DR {dr}: {sinr} < {threshold}")]
    SinrViolation { dr: usize, sinr: f64, threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P2Settings {
    pub sdp: SdpSettings,
    /// Largest accepted `λ₂/λ₁` of an information covariance.
    pub rank_tolerance: f64,
    /// Accepted relative SINR shortfall of the recovered beamformers.
    pub sinr_slack: f64,
    /// Relative margin above the noise power that the final projection
    /// leaves on every SINR row.
    pub sinr_margin: f64,
}

impl Default for P2Settings {
    fn default() -> Self {
        Self { sdp: SdpSettings { tolerance: 1e-11, acceptable_tolerance: 1e-9, ..SdpSettings::default() }, rank_tolerance: 1e-5, sinr_slack: 1e-6, sinr_margin: 1e-9 }
    }
}

/// Solution of the relaxed problem.
#[derive(Debug, Clone, PartialEq)]
pub struct P2Solution {
    /// `W_i` per DR.
    pub w_blocks: Vec<CMatrix>,
    pub v_e: CMatrix,
    /// `Σ_i tr(S W_i) + tr(S V_E)`, watts.
    pub objective: f64,
    pub dual_bound: f64,
    /// `λ₂/λ₁` of every `W_i`.
    pub rank_report: Vec<f64>,
    /// `λ₂/λ₁` of every `W_i` as returned by the solver, before rank reduction.
    pub raw_rank_report: Vec<f64>,
    /// `λ₂/λ₁` of `V_E`, or 0 when `V_E` is numerically zero.
    pub energy_rank_ratio: f64,
    pub iterations: usize,
    pub residuals: Residuals,
}

/// `V_E` counts as zero when its largest eigenvalue is below this fraction
/// of the power budget.
const ZERO_ENERGY: f64 = 1e-9;

/// Beams weaker than this fraction of the power budget are interior-point
/// residue and are dropped before the final projection.
const NEGLIGIBLE_POWER: f64 = 1e-7;

/// The power row counts as binding within this relative distance of `P`.
const ACTIVE_POWER: f64 = 1e-6;

/// `λ₂/λ₁` with `0` for a zero matrix.
fn rank_ratio(values: &[f64]) -> f64 {
    match values {
        [l1, l2, ..] if *l1 > 0.0 => l2.max(0.0) / l1,
        _ => 0.0,
    }
}

/// One SINR-constrained receiver as the relaxed problem sees it: an
/// estimated effective channel and its CSI quality.
#[derive(Debug, Clone, PartialEq)]
pub struct DataLink {
    pub channel: Vec<C64>,
    pub rho: f64,
    pub error_variance: f64,
    pub sinr_threshold: f64,
    pub noise_power_w: f64,
}

/// The relaxed problem's data, independent of how the channels came about.
#[derive(Debug, Clone, PartialEq)]
pub struct P2Instance {
    /// Energy objective matrix `S`.
    pub energy: CMatrix,
    pub data: Vec<DataLink>,
    pub power_w: f64,
}

impl P2Instance {
    /// The instance for fluid-antenna receivers on `ports`.
    pub fn from_ports(ports: &PortSelection, channels: &ChannelSet, cfg: &SystemConfig) -> Result<Self, BeamformingError> {
        let energy = build_s_re(ports, channels, cfg)?;
        let mut data = Vec::with_capacity(cfg.num_dr());
        for (i, rx) in cfg.data_receivers.iter().enumerate() {
            let link = channels.dr_links.get(i).ok_or(ModelError::ReceiverOutOfRange { index: i, count: channels.dr_links.len() })?;
            let port = ports.dr[i];
            if port >= link.estimated.ports() {
                return Err(ModelError::PortOutOfRange { port, ports: link.estimated.ports() }.into());
            }
            data.push(DataLink {
                channel: link.estimated.port(port).to_vec(),
                rho: link.rho,
                error_variance: link.error_variance,
                sinr_threshold: rx.sinr_threshold,
                noise_power_w: rx.noise_power_w,
            });
        }
        Ok(Self { energy, data, power_w: cfg.power_w })
    }

    pub fn tx_antennas(&self) -> usize {
        self.energy.rows()
    }

    /// Blocks `0..K_D` hold `W_i`, the last block holds `V_E`; constraints
    /// are the SINR rows followed by the power row.
    pub fn assemble(&self) -> SdpProblem {
        let m = self.tx_antennas();
        let kd = self.data.len();
        let mut constraints = Vec::with_capacity(kd + 1);
        for (i, dl) in self.data.iter().enumerate() {
            let f = signal_matrix(&dl.channel, dl.rho, dl.error_variance, dl.sinr_threshold).scaled(1.0 / dl.sinr_threshold);
            let d = leakage_matrix(&dl.channel, dl.rho, dl.error_variance).scaled(-1.0);
            let coeffs = (0..=kd).map(|b| if b == i { f.clone() } else { d.clone() }).collect();
            constraints.push(SdpConstraint { coeffs, rhs: dl.noise_power_w, sense: Sense::GreaterEq });
        }
        constraints.push(SdpConstraint { coeffs: vec![CMatrix::identity(m); kd + 1], rhs: self.power_w, sense: Sense::LessEq });
        SdpProblem { block_dims: vec![m; kd + 1], objective: vec![self.energy.clone(); kd + 1], constraints }
    }

    /// SINR of receiver `i` on its estimated effective channel.
    pub fn sinr(&self, i: usize, solution: &BeamformingSolution) -> f64 {
        let dl = &self.data[i];
        let rho2 = dl.rho * dl.rho;
        let gain = |w: &[C64]| dot_conj(&dl.channel, w).norm_sqr();
        let signal = rho2 * gain(&solution.w[i]);
        let mut denom = rho2 * solution.energy_covariance.quad_form(&dl.channel)
            + (1.0 - rho2) * dl.error_variance * solution.total_power()
            + dl.noise_power_w;
        for (k, w) in solution.w.iter().enumerate() {
            if k != i {
                denom += rho2 * gain(w);
            }
        }
        if denom == 0.0 {
            return if signal > 0.0 { f64::INFINITY } else { 0.0 };
        }
        signal / denom
    }

    /// `tr(S Ω)`.
    pub fn objective(&self, solution: &BeamformingSolution) -> f64 {
        self.energy.dot(&solution.transmit_covariance())
    }
}

/// Builds the relaxed problem for fixed ports.
pub fn assemble_p2(ports: &PortSelection, channels: &ChannelSet, cfg: &SystemConfig) -> Result<SdpProblem, BeamformingError> {
    Ok(P2Instance::from_ports(ports, channels, cfg)?.assemble())
}

/// Solves the relaxed problem at fixed ports.
///
/// The energy part of the optimum can be moved freely between `V_E` and the
/// `W_i`, and an interior-point method returns the centre of that optimal
/// face, where the `W_i` carry a share of the energy beam and are not rank
/// one. The rank-reduction step then rebuilds an optimal point with
/// `W_i' = W_i ĥ_i ĥ_iᴴ W_i / (ĥ_iᴴ W_i ĥ_i)` and
/// `V_E' = Σ_i W_i + V_E − Σ_i W_i'`, which keeps every SINR row, the power
/// and the objective unchanged. A final power adjustment removes the residual
/// SINR shortfall the solver's tolerance leaves behind.
///
/// When the objective vanishes identically (no weighted ERs) the solver
/// minimizes transmit power instead.
pub fn solve_p2(
    ports: &PortSelection,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    settings: &P2Settings,
) -> Result<P2Solution, BeamformingError> {
    solve_instance(&P2Instance::from_ports(ports, channels, cfg)?, settings)
}

/// [`solve_p2`] on explicit problem data.
pub fn solve_instance(instance: &P2Instance, settings: &P2Settings) -> Result<P2Solution, BeamformingError> {
    let problem = instance.assemble();
    let power = instance.power_w;
    let m = instance.tx_antennas();
    let mut scaled = problem.clone();
    let flat = problem.objective.iter().all(|s| s.max_abs() == 0.0);
    if flat {
        scaled.objective = vec![CMatrix::identity(m).scaled(-1.0); problem.block_dims.len()];
    }
    // Work in units of the power budget.
    for con in &mut scaled.constraints {
        con.rhs /= power;
    }

    let sol = solve(&scaled, &settings.sdp)?;
    match sol.status {
        SdpStatus::Optimal | SdpStatus::NearOptimal => {}
        SdpStatus::Infeasible => return Err(BeamformingError::Infeasible { certificate: sol.infeasibility.unwrap_or(0.0) }),
        status => return Err(BeamformingError::Solver { status, residuals: sol.residuals }),
    }

    let raw: Vec<CMatrix> = sol.blocks.iter().map(|x| x.scaled(power)).collect();
    let raw_rank_report = raw[..raw.len() - 1].iter().map(|w| rank_ratio(&hermitian_eigen(w).values)).collect();
    let mut blocks = reduce_rank(&raw, instance);
    project_onto_constraints(&mut blocks, &problem, power, settings.sinr_margin);

    let objective = problem.objective_value(&blocks);
    let v_e = blocks.pop().expect("energy block");
    let rank_report = blocks.iter().map(|w| rank_ratio(&hermitian_eigen(w).values)).collect();
    let energy = hermitian_eigen(&v_e);
    let energy_rank_ratio = if energy.max() <= ZERO_ENERGY * power { 0.0 } else { rank_ratio(&energy.values) };
    Ok(P2Solution {
        w_blocks: blocks,
        v_e,
        objective,
        dual_bound: if flat { objective } else { sol.dual_bound * power },
        rank_report,
        raw_rank_report,
        energy_rank_ratio,
        iterations: sol.iterations,
        residuals: sol.residuals,
    })
}

/// Rank-one information covariances with the same signal powers and the
/// same transmit covariance.
fn reduce_rank(raw: &[CMatrix], instance: &P2Instance) -> Vec<CMatrix> {
    let kd = instance.data.len();
    let m = instance.tx_antennas();
    let mut omega = raw[kd].clone();
    raw[..kd].iter().for_each(|w| omega += w);
    let mut out = Vec::with_capacity(kd + 1);
    for (w, dl) in raw[..kd].iter().zip(&instance.data) {
        let wh = w.mul_vec(&dl.channel);
        let signal = w.quad_form(&dl.channel);
        let reduced = if signal > 0.0 { CMatrix::outer(&wh).scaled(1.0 / signal) } else { CMatrix::zeros(m, m) };
        omega -= &reduced;
        out.push(reduced);
    }
    // Ω − Σ W_i' is PSD in exact arithmetic; drop the rounding noise.
    let eig = hermitian_eigen(&omega);
    let mut v_e = CMatrix::zeros(m, m);
    for (k, &l) in eig.values.iter().enumerate() {
        if l > 0.0 {
            v_e.add_scaled(l, &CMatrix::outer(eig.vector(k)));
        }
    }
    v_e.symmetrize();
    out.push(v_e);
    out
}

/// Moves the beams by the smallest amount that makes every SINR row hold
/// with relative margin `margin` and the power row hold exactly.
///
/// A SINR row is a small difference of large received powers, so the
/// solver's residual, tiny against the transmit power, can still be a
/// noticeable fraction of the noise power. The covariances are written as
/// sums of beams `u uᴴ` and a few Gauss-Newton steps drive the rows onto
/// their targets; the resulting change of the beams, and hence of the
/// objective, is of the order of the residual itself. Rows with slack keep
/// their current value so the step cannot disturb them.
fn project_onto_constraints(blocks: &mut [CMatrix], problem: &SdpProblem, power: f64, margin: f64) {
    let kd = blocks.len() - 1;
    if kd == 0 {
        return;
    }
    // (block, beam) pairs.
    let mut beams: Vec<(usize, Vec<C64>)> = Vec::new();
    for (b, x) in blocks.iter().enumerate() {
        let eig = hermitian_eigen(x);
        for (k, &l) in eig.values.iter().enumerate() {
            if l > NEGLIGIBLE_POWER * power && (b == kd || k == 0) {
                beams.push((b, eig.vector(k).iter().map(|z| z * l.sqrt()).collect()));
            }
        }
    }
    // The dropped residue's power goes to the strongest energy beam, or to
    // the strongest beam when there is none.
    let kept: f64 = beams.iter().map(|(_, u)| norm_sq(u)).sum();
    let total: f64 = blocks.iter().map(|x| x.trace().re).sum();
    let key = |(b, u): &(usize, Vec<C64>)| (*b == kd, norm_sq(u));
    let strongest = beams.iter_mut().max_by(|a, b| key(a).partial_cmp(&key(b)).unwrap_or(core::cmp::Ordering::Equal));
    if let Some((_, u)) = strongest {
        let p = norm_sq(u);
        let scale = ((p + total - kept).max(0.0) / p).sqrt();
        u.iter_mut().for_each(|x| *x *= scale);
    }
    let value = |beams: &[(usize, Vec<C64>)], row: &SdpConstraint| -> f64 {
        beams.iter().map(|(b, u)| row.coeffs[*b].quad_form(u)).sum()
    };
    // SINR rows are pinned to their target or current value; the power row
    // only takes part when it binds.
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (k, row) in problem.constraints.iter().enumerate() {
        let v = value(&beams, row);
        let target = match row.sense {
            Sense::GreaterEq => v.max(row.rhs * (1.0 + margin)),
            Sense::LessEq if problem.constraint_value(k, blocks) >= row.rhs * (1.0 - ACTIVE_POWER) => row.rhs,
            Sense::LessEq => continue,
            Sense::Equal => row.rhs,
        };
        rows.push(row);
        targets.push(target);
    }
    for _ in 0..4 {
        let resid: Vec<f64> = rows.iter().zip(&targets).map(|(row, t)| t - value(&beams, row)).collect();
        // Gradient of uᴴCu along u is 2Cu under the real inner product.
        let grads: Vec<Vec<Vec<C64>>> = rows
            .iter()
            .map(|row| beams.iter().map(|(b, u)| row.coeffs[*b].mul_vec(u).iter().map(|z| z * 2.0).collect()).collect())
            .collect();
        let gram = RMatrix::from_fn(rows.len(), rows.len(), |a, c| {
            grads[a].iter().zip(&grads[c]).map(|(ga, gc)| dot_conj(ga, gc).re).sum()
        });
        let Some(lambda) = solve_hpd(&gram, &resid) else { break };
        for (n, (_, u)) in beams.iter_mut().enumerate() {
            for (k, &l) in lambda.iter().enumerate() {
                u.iter_mut().zip(&grads[k][n]).for_each(|(x, g)| *x += g * l);
            }
        }
    }
    let m = blocks[0].rows();
    blocks.iter_mut().for_each(|x| *x = CMatrix::zeros(m, m));
    for (b, u) in &beams {
        blocks[*b] += &CMatrix::outer(u);
    }
}

/// Extracts `w_i = √λ₁ u₁` from every `W_i`, keeps `V_E` as a matrix and
/// re-checks the SINR targets with the extracted vectors.
///
/// `V_E` is decomposed into a single energy beam when it is rank one, into
/// no beam when it is zero, and left undecomposed otherwise.
pub fn recover_rank1(
    p2: &P2Solution,
    ports: &PortSelection,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    settings: &P2Settings,
) -> Result<BeamformingSolution, BeamformingError> {
    let mut solution = extract_beams(p2, cfg.power_w, settings)?;
    for (i, rx) in cfg.data_receivers.iter().enumerate() {
        let sinr = sinr_at_port(i, ports.dr[i], &solution, channels, cfg)?;
        check_sinr(i, sinr, rx.sinr_threshold, settings)?;
    }
    solution.objective = weighted_eh(&solution, ports, channels, cfg)?;
    Ok(solution)
}

/// [`recover_rank1`] for explicit problem data.
pub fn recover_instance(p2: &P2Solution, instance: &P2Instance, settings: &P2Settings) -> Result<BeamformingSolution, BeamformingError> {
    let mut solution = extract_beams(p2, instance.power_w, settings)?;
    for (i, dl) in instance.data.iter().enumerate() {
        check_sinr(i, instance.sinr(i, &solution), dl.sinr_threshold, settings)?;
    }
    solution.objective = instance.objective(&solution);
    Ok(solution)
}

fn check_sinr(dr: usize, sinr: f64, threshold: f64, settings: &P2Settings) -> Result<(), BeamformingError> {
    if sinr < threshold * (1.0 - settings.sinr_slack) {
        return Err(BeamformingError::SinrViolation { dr, sinr, threshold });
    }
    Ok(())
}

fn extract_beams(p2: &P2Solution, power: f64, settings: &P2Settings) -> Result<BeamformingSolution, BeamformingError> {
    let mut w = Vec::with_capacity(p2.w_blocks.len());
    for (block, wi) in p2.w_blocks.iter().enumerate() {
        let eig = hermitian_eigen(wi);
        if rank_ratio(&eig.values) > settings.rank_tolerance {
            return Err(BeamformingError::RankViolation { block, spectrum: eig.values });
        }
        let scale = eig.max().max(0.0).sqrt();
        w.push(eig.vector(0).iter().map(|x| x * scale).collect());
    }
    let energy = hermitian_eigen(&p2.v_e);
    let energy_beams = if energy.max() <= ZERO_ENERGY * power {
        Some(Vec::new())
    } else if rank_ratio(&energy.values) <= settings.rank_tolerance {
        let scale = energy.max().sqrt();
        Some(vec![energy.vector(0).iter().map(|x| x * scale).collect()])
    } else {
        None
    };
    Ok(BeamformingSolution { w, energy_covariance: p2.v_e.clone(), energy_beams, objective: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_scenario;
    use crate::sysmodel::db_to_linear;

    fn first_ports(cfg: &SystemConfig) -> PortSelection {
        PortSelection { dr: vec![0; cfg.num_dr()], er: vec![0; cfg.num_er()] }
    }

    #[test]
    fn assembled_shape() {
        let cfg = SystemConfig::default().with_ports(4);
        let ch = generate_scenario(1, &cfg).unwrap();
        let p = assemble_p2(&first_ports(&cfg), &ch, &cfg).unwrap();
        assert_eq!(p.block_dims, [4, 4, 4]);
        assert_eq!(p.constraints.len(), 3);
        let s = build_s_re(&first_ports(&cfg), &ch, &cfg).unwrap();
        assert!(p.objective.iter().all(|o| *o == s));
        assert_eq!(p.constraints[0].coeffs[1], p.constraints[0].coeffs[2]);
    }

    #[test]
    fn energy_only_is_closed_form() {
        let cfg = SystemConfig::default().with_ports(3).with_receivers(0, 2);
        let ch = generate_scenario(5, &cfg).unwrap();
        let ports = first_ports(&cfg);
        let p2 = solve_p2(&ports, &ch, &cfg, &P2Settings::default()).unwrap();
        let s = build_s_re(&ports, &ch, &cfg).unwrap();
        let expect = cfg.power_w * hermitian_eigen(&s).max();
        assert!((p2.objective - expect).abs() < 1e-8 * expect);
        let sol = recover_rank1(&p2, &ports, &ch, &cfg, &P2Settings::default()).unwrap();
        let beams = sol.energy_beams.unwrap();
        assert_eq!(beams.len(), 1);
        assert!((norm_sq(&beams[0]) - cfg.power_w).abs() < 1e-7);
    }

    #[test]
    fn default_instance_is_rank_one() {
        let cfg = SystemConfig::default().with_ports(10);
        for seed in 0..5 {
            let ch = generate_scenario(seed, &cfg).unwrap();
            let ports = first_ports(&cfg);
            let p2 = solve_p2(&ports, &ch, &cfg, &P2Settings::default()).unwrap();
            assert!(p2.rank_report.iter().all(|r| *r < 1e-5), "{:?}", p2.rank_report);
            assert!(p2.energy_rank_ratio < 1e-5);
            let sol = recover_rank1(&p2, &ports, &ch, &cfg, &P2Settings::default()).unwrap();
            assert!((sol.objective - p2.objective).abs() <= 1e-6 * p2.objective);
            assert!(sol.total_power() <= cfg.power_w * (1.0 + 1e-8), "{}", sol.total_power());
            assert!(p2.dual_bound >= p2.objective * (1.0 - 1e-8));
        }
    }

    #[test]
    fn data_only_minimizes_power() {
        let cfg = SystemConfig::default().with_ports(2).with_receivers(1, 0);
        let ch = generate_scenario(2, &cfg).unwrap();
        let ports = first_ports(&cfg);
        let p2 = solve_p2(&ports, &ch, &cfg, &P2Settings::default()).unwrap();
        assert_eq!(p2.objective, 0.0);
        let sol = recover_rank1(&p2, &ports, &ch, &cfg, &P2Settings::default()).unwrap();
        // A lone DR needs exactly γσ²/‖h‖² with a matched beam.
        let h = ch.dr_links[0].estimated.port(0);
        let rx = &cfg.data_receivers[0];
        let need = rx.sinr_threshold * rx.noise_power_w / norm_sq(h);
        assert!((sol.total_power() - need).abs() < 1e-6 * need, "{} vs {need}", sol.total_power());
    }

    #[test]
    fn unreachable_sinr_is_infeasible() {
        let mut cfg = SystemConfig::default().with_ports(2);
        cfg.data_receivers[0].sinr_threshold = db_to_linear(120.0);
        let ch = generate_scenario(3, &cfg).unwrap();
        let err = solve_p2(&first_ports(&cfg), &ch, &cfg, &P2Settings::default()).unwrap_err();
        assert!(matches!(err, BeamformingError::Infeasible { .. }), "{err:?}");
    }

    #[test]
    fn rank_violation_is_reported() {
        let cfg = SystemConfig::default().with_ports(2).with_receivers(1, 1);
        let ch = generate_scenario(4, &cfg).unwrap();
        let ports = first_ports(&cfg);
        let mut p2 = solve_p2(&ports, &ch, &cfg, &P2Settings::default()).unwrap();
        p2.w_blocks[0] = CMatrix::identity(cfg.tx_antennas).scaled(0.1);
        let err = recover_rank1(&p2, &ports, &ch, &cfg, &P2Settings::default()).unwrap_err();
        match err {
            BeamformingError::RankViolation { block, spectrum } => {
                assert_eq!(block, 0);
                assert_eq!(spectrum.len(), cfg.tx_antennas);
            }
            other => panic!("{other:?}"),
        }
    }
}
