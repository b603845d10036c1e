//! Correlated multi-port channels with imperfect CSI.
//!
//! Every fluid antenna sees `N` ports whose channels share a common
//! reference component, giving inter-port correlation `μ²`. The transmitter
//! only knows an estimate; the true channel mixes the estimate with an
//! independent error term.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand_chacha::rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{CMatrix, C64};
use crate::rng::{stream, Population, Purpose, StreamId};
use crate::specfun::{port_correlation_mu, SpecFunError};
use crate::sysmodel::{ConfigError, SystemConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("distance {0} m is below the 1 m reference distance")]
    BelowReferenceDistance(f64),
    #[error("invalid channel parameter `{name}` = {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    SpecialFunction(#[from] SpecFunError),
}

/// An `M × N` channel: row `m` is a transmit antenna, column `n` a port.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(CMatrix);

impl ChannelMatrix {
    pub fn new(entries: CMatrix) -> Self {
        Self(entries)
    }

    pub fn tx_antennas(&self) -> usize {
        self.0.rows()
    }

    pub fn ports(&self) -> usize {
        self.0.cols()
    }

    /// Channel vector of port `n`.
    pub fn port(&self, n: usize) -> &[C64] {
        self.0.column(n)
    }

    pub fn port_mut(&mut self, n: usize) -> &mut [C64] {
        self.0.column_mut(n)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// Estimated and true channel of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiPair {
    pub estimated: ChannelMatrix,
    pub true_channel: ChannelMatrix,
    pub rho: f64,
    /// Per-entry variance of the estimation error (the link pathloss).
    pub error_variance: f64,
}

/// All links of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub dr_links: Vec<CsiPair>,
    pub er_links: Vec<CsiPair>,
    /// Ports with CSI, 0-based and ascending.
    pub selected_ports: Vec<usize>,
}

/// Large-scale gain `d^(−α)` relative to a 1 m reference.
pub fn pathloss(distance_m: f64, exponent: f64) -> Result<f64, ChannelError> {
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(ChannelError::Parameter { name: "pathloss_exponent", value: exponent });
    }
    if !(distance_m >= 1.0 && distance_m.is_finite()) {
        return Err(ChannelError::BelowReferenceDistance(distance_m));
    }
    Ok(distance_m.powf(-exponent))
}

/// Ports `0, L, 2L, …` below `n`.
pub fn selected_ports(ports: usize, stride: usize) -> Vec<usize> {
    (0..ports).step_by(stride.max(1)).collect()
}

fn complex_normal<R: RngCore + ?Sized>(rng: &mut R, std: f64) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * std, im * std)
}

/// Draws a correlated `M × N` estimated channel.
///
/// The reference components of all antennas are drawn first, then the port
/// components column by column, so the channel for `N₁ < N₂` ports is
/// exactly the first `N₁` columns of the one for `N₂` under the same stream.
pub fn generate_estimated_channel<R: RngCore + ?Sized>(
    rng: &mut R,
    tx_antennas: usize,
    ports: usize,
    mu: f64,
    link_gain: f64,
) -> Result<ChannelMatrix, ChannelError> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(ChannelError::Parameter { name: "mu", value: mu });
    }
    if !(link_gain > 0.0 && link_gain.is_finite()) {
        return Err(ChannelError::Parameter { name: "link_gain", value: link_gain });
    }
    let half = 0.5f64.sqrt();
    let amp = link_gain.sqrt();
    let own = (1.0 - mu * mu).sqrt();
    let reference: Vec<C64> = (0..tx_antennas).map(|_| complex_normal(rng, half)).collect();
    let mut h = CMatrix::zeros(tx_antennas, ports);
    for n in 0..ports {
        for m in 0..tx_antennas {
            let x = complex_normal(rng, half);
            h[(m, n)] = (x * own + reference[m] * mu) * amp;
        }
    }
    Ok(ChannelMatrix(h))
}

/// Forms the true channel `ρ·Ĥ + √(1−ρ²)·Δ` with `Δ ~ CN(0, error_variance)`.
///
/// The error draws happen even at `ρ = 1` so streams stay aligned across
/// accuracy values.
pub fn apply_imperfect_csi<R: RngCore + ?Sized>(
    rng: &mut R,
    estimated: ChannelMatrix,
    rho: f64,
    error_variance: f64,
) -> Result<CsiPair, ChannelError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(ChannelError::Parameter { name: "rho", value: rho });
    }
    if !(error_variance >= 0.0 && error_variance.is_finite()) {
        return Err(ChannelError::Parameter { name: "error_variance", value: error_variance });
    }
    let std = (0.5 * error_variance).sqrt();
    let mix = (1.0 - rho * rho).sqrt();
    let (m, n) = (estimated.tx_antennas(), estimated.ports());
    let mut truth = CMatrix::zeros(m, n);
    for c in 0..n {
        for r in 0..m {
            let delta = complex_normal(rng, std);
            truth[(r, c)] = estimated.0[(r, c)] * rho + delta * mix;
        }
    }
    Ok(CsiPair { estimated, true_channel: ChannelMatrix(truth), rho, error_variance })
}

/// Draws every link of one trial from the streams of `trial_seed`.
pub fn generate_scenario(trial_seed: u64, cfg: &SystemConfig) -> Result<ChannelSet, ChannelError> {
    cfg.validate()?;
    let link = |population, index: usize, w: f64, rho: f64, distance: f64| -> Result<CsiPair, ChannelError> {
        let mu = port_correlation_mu(w)?;
        let gain = pathloss(distance, cfg.pathloss_exponent)?;
        let mut est_rng = stream(trial_seed, StreamId::new(population, index, Purpose::Estimate));
        let est = generate_estimated_channel(&mut est_rng, cfg.tx_antennas, cfg.ports, mu, gain)?;
        let mut err_rng = stream(trial_seed, StreamId::new(population, index, Purpose::Error));
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
    Ok(ChannelSet { dr_links, er_links, selected_ports: selected_ports(cfg.ports, cfg.port_stride) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pathloss_values() {
        assert_eq!(pathloss(1.0, 2.7).unwrap(), 1.0);
        assert!((pathloss(10.0, 2.7).unwrap() - 1.995262314968879e-3).abs() < 1e-15);
        assert!((pathloss(3.0, 2.7).unwrap() - 3f64.powf(-2.7)).abs() < 1e-16);
        assert!(matches!(pathloss(0.5, 2.7), Err(ChannelError::BelowReferenceDistance(_))));
        assert!(pathloss(2.0, 0.0).is_err());
    }

    #[test]
    fn port_subsets() {
        assert_eq!(selected_ports(5, 1), [0, 1, 2, 3, 4]);
        let s = selected_ports(200, 16);
        assert_eq!(s.len(), 13);
        assert_eq!(&s[..3], &[0, 16, 32]);
        assert_eq!(*s.last().unwrap(), 192);
        assert_eq!(selected_ports(7, 7), [0]);
    }

    #[test]
    fn full_correlation_gives_identical_ports() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = generate_estimated_channel(&mut rng, 3, 5, 1.0, 2.0).unwrap();
        for n in 1..5 {
            assert_eq!(h.port(n), h.port(0));
        }
    }

    #[test]
    fn smaller_port_count_is_a_prefix() {
        let big = generate_estimated_channel(&mut ChaCha8Rng::seed_from_u64(9), 4, 50, 0.7, 0.1).unwrap();
        let small = generate_estimated_channel(&mut ChaCha8Rng::seed_from_u64(9), 4, 10, 0.7, 0.1).unwrap();
        for n in 0..10 {
            assert_eq!(big.port(n), small.port(n));
        }
    }

    #[test]
    fn perfect_csi_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = generate_estimated_channel(&mut rng, 2, 4, 0.5, 1.0).unwrap();
        let pair = apply_imperfect_csi(&mut rng, h.clone(), 1.0, 1.0).unwrap();
        assert_eq!(pair.true_channel, h);
    }

    #[test]
    fn invalid_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(generate_estimated_channel(&mut rng, 2, 2, 1.5, 1.0).is_err());
        assert!(generate_estimated_channel(&mut rng, 2, 2, 0.5, 0.0).is_err());
        let h = generate_estimated_channel(&mut rng, 2, 2, 0.5, 1.0).unwrap();
        assert!(apply_imperfect_csi(&mut rng, h, -0.1, 1.0).is_err());
    }

    #[test]
    fn scenario_shapes_and_determinism() {
        let cfg = SystemConfig::default();
        let a = generate_scenario(42, &cfg).unwrap();
        assert_eq!(a.dr_links.len(), 2);
        assert_eq!(a.er_links.len(), 2);
        for link in a.dr_links.iter().chain(&a.er_links) {
            assert_eq!((link.estimated.tx_antennas(), link.estimated.ports()), (4, 200));
        }
        assert_eq!(a.selected_ports.len(), 200);
        assert_eq!(a, generate_scenario(42, &cfg).unwrap());
        assert_ne!(a, generate_scenario(43, &cfg).unwrap());
        assert_eq!(a.dr_links[0].error_variance, pathloss(10.0, 2.7).unwrap());
        assert_eq!(a.er_links[0].error_variance, pathloss(3.0, 2.7).unwrap());
    }

    #[test]
    fn scenario_rejects_invalid_config() {
        let cfg = SystemConfig::default().with_csi_accuracy(0.0);
        assert!(matches!(generate_scenario(1, &cfg), Err(ChannelError::Config(_))));
    }
}
