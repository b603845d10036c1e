//! Alternating optimization of beamformers and ports.
//!
//! Each iteration solves the relaxed beamforming problem at the current
//! ports, recovers rank-one beams, then moves every receiver to its best
//! port for those beams. The beams of iteration `t` stay feasible at the
//! ports chosen from them (each DR moves to a port with no lower SINR) and
//! harvest no less energy there, so the objective cannot decrease. The loop
//! keeps those beams whenever the solver's answer at the new ports is worse
//! by rounding, which makes the trace non-decreasing exactly rather than up
//! to solver tolerance.

use alloc::vec::Vec;

use crate::beamforming::{recover_rank1, solve_p2, BeamformingError, P2Settings};
use crate::channel::ChannelSet;
use crate::portselect::{update_ports, PortSelectError};
use crate::sysmodel::{weighted_eh, BeamformingSolution, ModelError, PortSelection, SystemConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AoError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    PortSelect(#[from] PortSelectError),
    #[error("beamforming failed at iteration {iteration}: {source}")]
    Beamforming { iteration: usize, source: BeamformingError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AoStatus {
    /// Ports stopped moving or the objective improved by at most the tolerance.
    Converged,
    MaxIterations,
    /// The relaxed problem was infeasible at the given (0-based) iteration.
    Infeasible { iteration: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoSettings {
    pub p2: P2Settings,
    pub max_iterations: usize,
    /// Stop once an iteration improves the objective by at most this, watts.
    pub tolerance_w: f64,
}

impl AoSettings {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self { p2: P2Settings::default(), max_iterations: cfg.max_iterations, tolerance_w: cfg.tolerance_w }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoResult {
    pub solution: BeamformingSolution,
    pub ports: PortSelection,
    /// Weighted harvested power after every beamforming solve.
    pub objective_trace: Vec<f64>,
    /// Number of beamforming solves.
    pub iterations: usize,
    pub status: AoStatus,
}

impl AoResult {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }

    pub fn is_feasible(&self) -> bool {
        !matches!(self.status, AoStatus::Infeasible { .. })
    }
}

fn strongest_port(channel: &crate::channel::ChannelMatrix, ports: &[usize]) -> usize {
    let mut best = (ports[0], f64::NEG_INFINITY);
    for &n in ports {
        let gain = crate::linalg::norm_sq(channel.port(n));
        if gain > best.1 {
            best = (n, gain);
        }
    }
    best.0
}

/// Starts every receiver at the port with the strongest estimated channel.
pub fn initialize_ports(channels: &ChannelSet, cfg: &SystemConfig) -> Result<PortSelection, ModelError> {
    if channels.dr_links.len() != cfg.num_dr() || channels.er_links.len() != cfg.num_er() {
        return Err(ModelError::Dimension("channel set does not match the configuration"));
    }
    if channels.selected_ports.is_empty() {
        return Err(ModelError::Dimension("no ports are selected"));
    }
    let pick = |links: &[crate::channel::CsiPair]| links.iter().map(|l| strongest_port(&l.estimated, &channels.selected_ports)).collect();
    Ok(PortSelection { dr: pick(&channels.dr_links), er: pick(&channels.er_links) })
}

/// Runs the loop with settings taken from `cfg`.
pub fn optimize(channels: &ChannelSet, cfg: &SystemConfig) -> Result<AoResult, AoError> {
    optimize_with(channels, cfg, &AoSettings::from_config(cfg))
}

pub fn optimize_with(channels: &ChannelSet, cfg: &SystemConfig, settings: &AoSettings) -> Result<AoResult, AoError> {
    let mut ports = initialize_ports(channels, cfg)?;
    let solve = |ports: &PortSelection, iteration: usize| -> Result<Option<BeamformingSolution>, AoError> {
        let wrap = |source| AoError::Beamforming { iteration, source };
        match solve_p2(ports, channels, cfg, &settings.p2) {
            Ok(p2) => recover_rank1(&p2, ports, channels, cfg, &settings.p2).map(Some).map_err(wrap),
            Err(BeamformingError::Infeasible { .. }) => Ok(None),
            Err(e) => Err(wrap(e)),
        }
    };
    let infeasible = |ports: PortSelection, trace: Vec<f64>, iteration: usize, solution: Option<BeamformingSolution>| AoResult {
        solution: solution.unwrap_or_else(|| BeamformingSolution::zero(cfg.num_dr(), cfg.tx_antennas)),
        ports,
        objective_trace: trace,
        iterations: iteration + 1,
        status: AoStatus::Infeasible { iteration },
    };

    let mut solution = match solve(&ports, 0)? {
        Some(s) => s,
        None => return Ok(infeasible(ports, Vec::new(), 0, None)),
    };
    let mut trace = alloc::vec![solution.objective];
    let max_iterations = settings.max_iterations.max(1);
    let mut status = AoStatus::MaxIterations;
    while trace.len() < max_iterations {
        let next_ports = update_ports(&solution, channels, cfg)?;
        if next_ports == ports {
            status = AoStatus::Converged;
            break;
        }
        let iteration = trace.len();
        let mut incumbent = solution.clone();
        incumbent.objective = weighted_eh(&incumbent, &next_ports, channels, cfg)?;
        let candidate = match solve(&next_ports, iteration)? {
            Some(s) => s,
            None => return Ok(infeasible(next_ports, trace, iteration, Some(incumbent))),
        };
        solution = if candidate.objective >= incumbent.objective { candidate } else { incumbent };
        ports = next_ports;
        let previous = *trace.last().unwrap_or(&0.0);
        trace.push(solution.objective);
        if solution.objective - previous <= settings.tolerance_w {
            status = AoStatus::Converged;
            break;
        }
    }
    Ok(AoResult { solution, ports, iterations: trace.len(), objective_trace: trace, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_scenario;
    use crate::linalg::norm_sq;
    use crate::sysmodel::sinr_at_port;

    #[test]
    fn single_port_takes_one_solve() {
        let cfg = SystemConfig::default().with_ports(1);
        let ch = generate_scenario(11, &cfg).unwrap();
        let res = optimize(&ch, &cfg).unwrap();
        assert_eq!(res.iterations, 1);
        assert_eq!(res.status, AoStatus::Converged);
        assert_eq!(res.ports, PortSelection { dr: alloc::vec![0, 0], er: alloc::vec![0, 0] });
        let p2 = solve_p2(&res.ports, &ch, &cfg, &P2Settings::default()).unwrap();
        assert!((res.objective() - p2.objective).abs() <= 1e-6 * p2.objective);
    }

    #[test]
    fn initial_ports_maximize_column_norm() {
        let cfg = SystemConfig::default().with_ports(30);
        let ch = generate_scenario(12, &cfg).unwrap();
        let ports = initialize_ports(&ch, &cfg).unwrap();
        for (link, &p) in ch.dr_links.iter().zip(&ports.dr).chain(ch.er_links.iter().zip(&ports.er)) {
            let best = norm_sq(link.estimated.port(p));
            assert!((0..30).all(|n| norm_sq(link.estimated.port(n)) <= best));
        }
    }

    #[test]
    fn identical_ports_start_at_the_first() {
        let cfg = SystemConfig::default().with_ports(8).with_antenna_size(0.0);
        let ch = generate_scenario(13, &cfg).unwrap();
        let ports = initialize_ports(&ch, &cfg).unwrap();
        assert!(ports.dr.iter().chain(&ports.er).all(|&p| p == 0));
    }

    #[test]
    fn no_energy_receivers_stop_after_first_change() {
        let cfg = SystemConfig::default().with_ports(20).with_receivers(2, 0);
        let ch = generate_scenario(14, &cfg).unwrap();
        let res = optimize(&ch, &cfg).unwrap();
        assert_eq!(res.status, AoStatus::Converged);
        assert!(res.iterations <= 2);
        assert!(res.objective_trace.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn default_instance_is_monotone_and_feasible() {
        let cfg = SystemConfig::default().with_ports(50);
        for seed in 20..23 {
            let ch = generate_scenario(seed, &cfg).unwrap();
            let res = optimize(&ch, &cfg).unwrap();
            assert_eq!(res.status, AoStatus::Converged);
            assert!(res.iterations <= cfg.max_iterations);
            for pair in res.objective_trace.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-9, "{:?}", res.objective_trace);
            }
            for (i, rx) in cfg.data_receivers.iter().enumerate() {
                let sinr = sinr_at_port(i, res.ports.dr[i], &res.solution, &ch, &cfg).unwrap();
                assert!(sinr >= rx.sinr_threshold * (1.0 - 1e-6));
            }
            assert!(res.solution.total_power() <= cfg.power_w * (1.0 + 1e-8));
            assert!(res.objective() >= res.objective_trace[0]);
        }
    }

    #[test]
    fn unreachable_threshold_is_reported() {
        let cfg = SystemConfig::default().with_ports(5).with_sinr_threshold_db(120.0);
        let ch = generate_scenario(15, &cfg).unwrap();
        let res = optimize(&ch, &cfg).unwrap();
        assert_eq!(res.status, AoStatus::Infeasible { iteration: 0 });
        assert!(!res.is_feasible());
        assert!(res.objective_trace.is_empty());
    }

    #[test]
    fn iteration_cap_is_respected() {
        let cfg = SystemConfig::default().with_ports(100);
        let ch = generate_scenario(16, &cfg).unwrap();
        let settings = AoSettings { max_iterations: 1, ..AoSettings::from_config(&cfg) };
        let res = optimize_with(&ch, &cfg, &settings).unwrap();
        assert_eq!(res.iterations, 1);
        assert_eq!(res.status, AoStatus::MaxIterations);
    }
}
