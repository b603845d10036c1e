//! Closed-form port selection for fixed beamformers.
//!
//! With the beamformers fixed, each receiver's port enters only its own
//! metric, so every receiver picks its port independently by scanning the
//! selected ports. Ties go to the lowest port index.

use crate::channel::ChannelSet;
use crate::linalg::CMatrix;
use crate::sysmodel::{BeamformingSolution, ModelError, PortSelection, SystemConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PortSelectError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("DR {0} has CSI accuracy 0; its SINR is identically zero")]
    ZeroAccuracy(usize),
    #[error("no ports are selected")]
    NoPorts,
}

/// First index of the largest score, scanning in order.
fn argmax(scores: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (n, v) in scores {
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((n, v));
        }
    }
    best.map(|(n, _)| n)
}

fn check(solution: &BeamformingSolution, cfg: &SystemConfig) -> Result<(), ModelError> {
    if solution.w.len() != cfg.num_dr() || solution.tx_antennas() != cfg.tx_antennas {
        return Err(ModelError::Dimension("solution does not match the configuration"));
    }
    Ok(())
}

/// Port of ER `er` maximizing `ρ² ĝ_nᴴ Ω ĝ_n` over the selected ports.
///
/// The harvested power at port `n` is this quantity plus a term that does
/// not depend on `n`.
pub fn select_er_port(
    er: usize,
    solution: &BeamformingSolution,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<usize, PortSelectError> {
    check(solution, cfg)?;
    let pair = channels.er_links.get(er).ok_or(ModelError::ReceiverOutOfRange { index: er, count: channels.er_links.len() })?;
    let omega = solution.transmit_covariance();
    er_port_for(pair.estimated.matrix(), pair.rho, &omega, &channels.selected_ports)
}

fn er_port_for(g: &CMatrix, rho: f64, omega: &CMatrix, ports: &[usize]) -> Result<usize, PortSelectError> {
    let rho2 = rho * rho;
    let scores = ports.iter().map(|&n| (n, rho2 * omega.quad_form(g.column(n))));
    argmax(scores).ok_or(PortSelectError::NoPorts)
}

/// Port of DR `dr` maximizing `ĥ_nᴴ W_i ĥ_n / (ĥ_nᴴ Ψ_i ĥ_n + Z_i)` with
/// `Z_i = ((1 − ρ_i²) σ_h² P_tx + σ_i²) / ρ_i²`, which is the SINR at port
/// `n` up to a positive factor.
pub fn select_dr_port(
    dr: usize,
    solution: &BeamformingSolution,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<usize, PortSelectError> {
    check(solution, cfg)?;
    let pair = channels.dr_links.get(dr).ok_or(ModelError::ReceiverOutOfRange { index: dr, count: channels.dr_links.len() })?;
    let rx = &cfg.data_receivers[dr];
    let rho2 = pair.rho * pair.rho;
    if rho2 == 0.0 {
        return Err(PortSelectError::ZeroAccuracy(dr));
    }
    let z = ((1.0 - rho2) * pair.error_variance * solution.total_power() + rx.noise_power_w) / rho2;
    let psi = solution.interference_covariance(dr);
    let w = &solution.w[dr];
    let h = pair.estimated.matrix();
    let scores = channels.selected_ports.iter().map(|&n| {
        let hn = h.column(n);
        let signal = crate::linalg::dot_conj(hn, w).norm_sqr();
        let denom = psi.quad_form(hn) + z;
        (n, if denom > 0.0 { signal / denom } else { 0.0 })
    });
    argmax(scores).ok_or(PortSelectError::NoPorts)
}

/// New ports for every receiver: all ERs first, then all DRs, each chosen
/// against the same beamformers.
pub fn update_ports(
    solution: &BeamformingSolution,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<PortSelection, PortSelectError> {
    let er = (0..cfg.num_er()).map(|j| select_er_port(j, solution, channels, cfg)).collect::<Result<_, _>>()?;
    let dr = (0..cfg.num_dr()).map(|i| select_dr_port(i, solution, channels, cfg)).collect::<Result<_, _>>()?;
    Ok(PortSelection { dr, er })
}
