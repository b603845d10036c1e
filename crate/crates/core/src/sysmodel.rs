//! Scenario parameters and the link metrics the optimizer works with.
//!
//! All quantities are linear: watts, linear SINR. Metrics are evaluated on
//! the *estimated* channels with the estimation error entering as an
//! expected power term; [`realized_weighted_eh`] evaluates a solution on the
//! true channels for reporting only.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::channel::{ChannelSet, CsiPair};
use crate::linalg::{dot_conj, norm_sq, CMatrix, C64};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("`{0}` must be at least 1")]
    ZeroCount(&'static str),
    #[error("the scenario needs at least one data or energy receiver")]
    NoReceivers,
    #[error("`{field}` = {value} is outside its valid range ({range})")]
    OutOfRange {
        field: &'static str,
        value: f64,
        range: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("port {port} out of range (ports: {ports})")]
    PortOutOfRange { port: usize, ports: usize },
    #[error("receiver {index} out of range (receivers: {count})")]
    ReceiverOutOfRange { index: usize, count: usize },
}

/// One data receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct DataReceiver {
    /// Fluid-antenna length in wavelengths (`W`).
    pub antenna_size: f64,
    /// CSI accuracy `ρ ∈ (0, 1]`.
    pub csi_accuracy: f64,
    /// Receiver noise power, watts.
    pub noise_power_w: f64,
    /// SINR threshold `γ`, linear.
    pub sinr_threshold: f64,
    pub distance_m: f64,
}

/// One energy receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReceiver {
    pub antenna_size: f64,
    /// CSI accuracy `ρ ∈ [0, 1]`.
    pub csi_accuracy: f64,
    /// Energy weight `β ≥ 0`.
    pub weight: f64,
    pub distance_m: f64,
}

/// Everything that defines a scenario and the optimizer's stopping rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Transmit antennas `M`.
    pub tx_antennas: usize,
    /// Ports per fluid antenna `N`.
    pub ports: usize,
    pub data_receivers: Vec<DataReceiver>,
    pub energy_receivers: Vec<EnergyReceiver>,
    /// Total transmit power `P`, watts.
    pub power_w: f64,
    pub pathloss_exponent: f64,
    /// CSI subsampling stride `L`: only every `L`-th port is estimated.
    pub port_stride: usize,
    /// `T_max`.
    pub max_iterations: usize,
    /// Convergence tolerance `τ` on the weighted harvested power, watts.
    pub tolerance_w: f64,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

impl Default for SystemConfig {
    /// Two DRs at 10 m and two ERs at 3 m, `M = 4`, `N = 200`, `W = 0.5`,
    /// perfect CSI, 30 dBm transmit power, −50 dBm noise, 10 dB SINR target,
    /// pathloss exponent 2.7, unit energy weights, no subsampling.
    fn default() -> Self {
        let dr = DataReceiver {
            antenna_size: 0.5,
            csi_accuracy: 1.0,
            noise_power_w: dbm_to_watts(-50.0),
            sinr_threshold: db_to_linear(10.0),
            distance_m: 10.0,
        };
        let er = EnergyReceiver {
            antenna_size: 0.5,
            csi_accuracy: 1.0,
            weight: 1.0,
            distance_m: 3.0,
        };
        Self {
            tx_antennas: 4,
            ports: 200,
            data_receivers: vec![dr; 2],
            energy_receivers: vec![er; 2],
            power_w: dbm_to_watts(30.0),
            pathloss_exponent: 2.7,
            port_stride: 1,
            max_iterations: 30,
            tolerance_w: 1e-6,
        }
    }
}

impl SystemConfig {
    pub fn num_dr(&self) -> usize {
        self.data_receivers.len()
    }

    pub fn num_er(&self) -> usize {
        self.energy_receivers.len()
    }

    pub fn with_ports(mut self, ports: usize) -> Self {
        self.ports = ports;
        self
    }

    /// Sets the same antenna size on every receiver.
    pub fn with_antenna_size(mut self, w: f64) -> Self {
        self.data_receivers.iter_mut().for_each(|r| r.antenna_size = w);
        self.energy_receivers.iter_mut().for_each(|r| r.antenna_size = w);
        self
    }

    /// Sets the same CSI accuracy on every receiver.
    pub fn with_csi_accuracy(mut self, rho: f64) -> Self {
        self.data_receivers.iter_mut().for_each(|r| r.csi_accuracy = rho);
        self.energy_receivers.iter_mut().for_each(|r| r.csi_accuracy = rho);
        self
    }

    pub fn with_sinr_threshold_db(mut self, db: f64) -> Self {
        let gamma = db_to_linear(db);
        self.data_receivers.iter_mut().for_each(|r| r.sinr_threshold = gamma);
        self
    }

    pub fn with_port_stride(mut self, stride: usize) -> Self {
        self.port_stride = stride;
        self
    }

    pub fn with_receivers(mut self, data: usize, energy: usize) -> Self {
        let dr = self.data_receivers.first().cloned().unwrap_or_else(|| Self::default().data_receivers[0].clone());
        let er = self.energy_receivers.first().cloned().unwrap_or_else(|| Self::default().energy_receivers[0].clone());
        self.data_receivers = vec![dr; data];
        self.energy_receivers = vec![er; energy];
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(field: &'static str, value: f64, ok: bool, range: &'static str) -> Result<(), ConfigError> {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange { field, value, range })
            }
        }
        if self.tx_antennas == 0 {
            return Err(ConfigError::ZeroCount("tx_antennas"));
        }
        if self.ports == 0 {
            return Err(ConfigError::ZeroCount("ports"));
        }
        if self.max_iterations == 0 {
            return Err(ConfigError::ZeroCount("max_iterations"));
        }
        if self.port_stride == 0 {
            return Err(ConfigError::ZeroCount("port_stride"));
        }
        if self.port_stride > self.ports {
            return Err(ConfigError::OutOfRange {
                field: "port_stride",
                value: self.port_stride as f64,
                range: "1 <= L <= N",
            });
        }
        if self.data_receivers.is_empty() && self.energy_receivers.is_empty() {
            return Err(ConfigError::NoReceivers);
        }
        check("power_w", self.power_w, self.power_w > 0.0, "> 0")?;
        check("pathloss_exponent", self.pathloss_exponent, self.pathloss_exponent > 0.0, "> 0")?;
        check("tolerance_w", self.tolerance_w, self.tolerance_w >= 0.0, ">= 0")?;
        for r in &self.data_receivers {
            check("antenna_size", r.antenna_size, r.antenna_size >= 0.0, ">= 0")?;
            check("csi_accuracy", r.csi_accuracy, r.csi_accuracy > 0.0 && r.csi_accuracy <= 1.0, "0 < rho <= 1 for data receivers")?;
            check("noise_power_w", r.noise_power_w, r.noise_power_w >= 0.0, ">= 0")?;
            check("sinr_threshold", r.sinr_threshold, r.sinr_threshold > 0.0, "> 0")?;
            check("dr_distance_m", r.distance_m, r.distance_m >= 1.0, ">= 1 m")?;
        }
        for r in &self.energy_receivers {
            check("antenna_size", r.antenna_size, r.antenna_size >= 0.0, ">= 0")?;
            check("csi_accuracy", r.csi_accuracy, (0.0..=1.0).contains(&r.csi_accuracy), "0 <= rho <= 1")?;
            check("energy_weight", r.weight, r.weight >= 0.0, ">= 0")?;
            check("er_distance_m", r.distance_m, r.distance_m >= 1.0, ">= 1 m")?;
        }
        Ok(())
    }
}

/// Active port of every receiver (0-based port indices).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PortSelection {
    pub dr: Vec<usize>,
    pub er: Vec<usize>,
}

/// Transmit beamformers.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    /// Information beamformer `w_i` of every DR.
    pub w: Vec<Vec<C64>>,
    /// Aggregate energy covariance `V_E = Σ_j v_j v_jᴴ`.
    pub energy_covariance: CMatrix,
    /// Energy beamformers recovered from `V_E`; empty when `V_E = 0`,
    /// `None` when `V_E` has rank above one.
    pub energy_beams: Option<Vec<Vec<C64>>>,
    /// Weighted harvested power reported by the optimizer, watts.
    pub objective: f64,
}

impl BeamformingSolution {
    pub fn zero(num_dr: usize, tx_antennas: usize) -> Self {
        Self {
            w: vec![vec![C64::new(0.0, 0.0); tx_antennas]; num_dr],
            energy_covariance: CMatrix::zeros(tx_antennas, tx_antennas),
            energy_beams: Some(Vec::new()),
            objective: 0.0,
        }
    }

    pub fn tx_antennas(&self) -> usize {
        self.energy_covariance.rows()
    }

    /// `Σ‖w_i‖² + tr(V_E)`.
    pub fn total_power(&self) -> f64 {
        self.w.iter().map(|w| norm_sq(w)).sum::<f64>() + self.energy_covariance.trace().re
    }

    /// `Ω = Σ_i w_i w_iᴴ + V_E`.
    pub fn transmit_covariance(&self) -> CMatrix {
        let mut omega = self.energy_covariance.clone();
        for w in &self.w {
            omega += &CMatrix::outer(w);
        }
        omega
    }

    /// `Ψ_i = Σ_{k≠i} w_k w_kᴴ + V_E`.
    pub fn interference_covariance(&self, dr: usize) -> CMatrix {
        let mut psi = self.energy_covariance.clone();
        for (k, w) in self.w.iter().enumerate() {
            if k != dr {
                psi += &CMatrix::outer(w);
            }
        }
        psi
    }

    /// The same solution with every beamformer rotated by a common phase.
    pub fn with_phase(&self, theta: f64) -> Self {
        let rot = C64::from_polar(1.0, theta);
        let mut out = self.clone();
        for w in &mut out.w {
            w.iter_mut().for_each(|x| *x *= rot);
        }
        if let Some(beams) = &mut out.energy_beams {
            for v in beams {
                v.iter_mut().for_each(|x| *x *= rot);
            }
        }
        out
    }

    fn check(&self, cfg: &SystemConfig) -> Result<(), ModelError> {
        let m = cfg.tx_antennas;
        if self.w.len() != cfg.num_dr() {
            return Err(ModelError::Dimension("one information beamformer per data receiver"));
        }
        if self.w.iter().any(|w| w.len() != m) {
            return Err(ModelError::Dimension("beamformer length must equal tx_antennas"));
        }
        if self.energy_covariance.rows() != m || !self.energy_covariance.is_square() {
            return Err(ModelError::Dimension("energy covariance must be M x M"));
        }
        Ok(())
    }
}

fn link<'a>(links: &'a [CsiPair], index: usize) -> Result<&'a CsiPair, ModelError> {
    links.get(index).ok_or(ModelError::ReceiverOutOfRange { index, count: links.len() })
}

fn column<'a>(pair: &'a CsiPair, port: usize, cfg: &SystemConfig) -> Result<&'a [C64], ModelError> {
    let h = &pair.estimated;
    if h.tx_antennas() != cfg.tx_antennas {
        return Err(ModelError::Dimension("channel rows must equal tx_antennas"));
    }
    if port >= h.ports() {
        return Err(ModelError::PortOutOfRange { port, ports: h.ports() });
    }
    Ok(h.port(port))
}

/// SINR of DR `dr` when receiving on `port`.
pub fn sinr_at_port(
    dr: usize,
    port: usize,
    solution: &BeamformingSolution,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<f64, ModelError> {
    solution.check(cfg)?;
    let pair = link(&channels.dr_links, dr)?;
    let rx = cfg.data_receivers.get(dr).ok_or(ModelError::ReceiverOutOfRange { index: dr, count: cfg.num_dr() })?;
    let h = column(pair, port, cfg)?;
    let rho2 = pair.rho * pair.rho;

    let gain = |w: &[C64]| dot_conj(h, w).norm_sqr();
    let signal = rho2 * gain(&solution.w[dr]);
    let mut interference = 0.0;
    for (k, w) in solution.w.iter().enumerate() {
        if k != dr {
            interference += rho2 * gain(w);
        }
    }
    interference += rho2 * solution.energy_covariance.quad_form(h);
    let error = (1.0 - rho2) * pair.error_variance * solution.total_power();
    let denom = interference + error + rx.noise_power_w;
    if denom == 0.0 {
        return Ok(if signal > 0.0 { f64::INFINITY } else { 0.0 });
    }
    Ok(signal / denom)
}

/// Power harvested by ER `er` on `port`, watts (receiver noise ignored).
pub fn eh_power_at_port(
    er: usize,
    port: usize,
    solution: &BeamformingSolution,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<f64, ModelError> {
    solution.check(cfg)?;
    let pair = link(&channels.er_links, er)?;
    let g = column(pair, port, cfg)?;
    let rho2 = pair.rho * pair.rho;
    let beams: f64 = solution.w.iter().map(|w| dot_conj(g, w).norm_sqr()).sum();
    let energy = solution.energy_covariance.quad_form(g);
    Ok(rho2 * (beams + energy) + (1.0 - rho2) * pair.error_variance * solution.total_power())
}

/// `E_H = Σ_j β_j E_j` at the selected ports.
pub fn weighted_eh(
    solution: &BeamformingSolution,
    ports: &PortSelection,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<f64, ModelError> {
    check_ports(ports, cfg)?;
    let mut total = 0.0;
    for (j, rx) in cfg.energy_receivers.iter().enumerate() {
        if rx.weight != 0.0 {
            total += rx.weight * eh_power_at_port(j, ports.er[j], solution, channels, cfg)?;
        }
    }
    Ok(total)
}

/// Weighted harvested power on the true channels at the selected ports,
/// for reporting the cost of imperfect CSI. Never used by the optimizer.
pub fn realized_weighted_eh(
    solution: &BeamformingSolution,
    ports: &PortSelection,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<f64, ModelError> {
    solution.check(cfg)?;
    check_ports(ports, cfg)?;
    let mut total = 0.0;
    for (j, rx) in cfg.energy_receivers.iter().enumerate() {
        let pair = link(&channels.er_links, j)?;
        let g = pair.true_channel.port(ports.er[j]);
        let beams: f64 = solution.w.iter().map(|w| dot_conj(g, w).norm_sqr()).sum();
        total += rx.weight * (beams + solution.energy_covariance.quad_form(g));
    }
    Ok(total)
}

/// SINR of every DR on the true channels at the selected ports.
pub fn realized_sinr(
    solution: &BeamformingSolution,
    ports: &PortSelection,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<Vec<f64>, ModelError> {
    solution.check(cfg)?;
    check_ports(ports, cfg)?;
    let mut out = Vec::with_capacity(cfg.num_dr());
    for (i, rx) in cfg.data_receivers.iter().enumerate() {
        let h = link(&channels.dr_links, i)?.true_channel.port(ports.dr[i]);
        let signal = dot_conj(h, &solution.w[i]).norm_sqr();
        let mut denom = rx.noise_power_w + solution.energy_covariance.quad_form(h);
        for (k, w) in solution.w.iter().enumerate() {
            if k != i {
                denom += dot_conj(h, w).norm_sqr();
            }
        }
        out.push(signal / denom);
    }
    Ok(out)
}

fn check_ports(ports: &PortSelection, cfg: &SystemConfig) -> Result<(), ModelError> {
    if ports.dr.len() != cfg.num_dr() || ports.er.len() != cfg.num_er() {
        return Err(ModelError::Dimension("one port per receiver"));
    }
    Ok(())
}

/// `S_rE = Σ_j β_j (ρ_j² ĝ_j ĝ_jᴴ + (1 − ρ_j²) σ_g² I)` at the active ER ports.
pub fn build_s_re(ports: &PortSelection, channels: &ChannelSet, cfg: &SystemConfig) -> Result<CMatrix, ModelError> {
    check_ports(ports, cfg)?;
    let m = cfg.tx_antennas;
    let mut s = CMatrix::zeros(m, m);
    for (j, rx) in cfg.energy_receivers.iter().enumerate() {
        let pair = link(&channels.er_links, j)?;
        let g = column(pair, ports.er[j], cfg)?;
        s += &weighted_rank_one(g, rx.weight * pair.rho * pair.rho, rx.weight * (1.0 - pair.rho * pair.rho) * pair.error_variance);
    }
    Ok(s)
}

/// `F_rD = ρ_i² ĥ_i ĥ_iᴴ − γ_i (1 − ρ_i²) σ_h² I`; may be indefinite.
pub fn build_f_rd(dr: usize, ports: &PortSelection, channels: &ChannelSet, cfg: &SystemConfig) -> Result<CMatrix, ModelError> {
    check_ports(ports, cfg)?;
    let pair = link(&channels.dr_links, dr)?;
    let h = column(pair, ports.dr[dr], cfg)?;
    Ok(signal_matrix(h, pair.rho, pair.error_variance, cfg.data_receivers[dr].sinr_threshold))
}

/// `D_rD = ρ_i² ĥ_i ĥ_iᴴ + (1 − ρ_i²) σ_h² I`.
pub fn build_d_rd(dr: usize, ports: &PortSelection, channels: &ChannelSet, cfg: &SystemConfig) -> Result<CMatrix, ModelError> {
    check_ports(ports, cfg)?;
    let pair = link(&channels.dr_links, dr)?;
    let h = column(pair, ports.dr[dr], cfg)?;
    Ok(leakage_matrix(h, pair.rho, pair.error_variance))
}

/// `ρ² h hᴴ − γ (1 − ρ²) σ_h² I` for an arbitrary channel vector.
pub fn signal_matrix(h: &[C64], rho: f64, error_variance: f64, sinr_threshold: f64) -> CMatrix {
    let rho2 = rho * rho;
    weighted_rank_one(h, rho2, -sinr_threshold * (1.0 - rho2) * error_variance)
}

/// `ρ² h hᴴ + (1 − ρ²) σ_h² I` for an arbitrary channel vector.
pub fn leakage_matrix(h: &[C64], rho: f64, error_variance: f64) -> CMatrix {
    let rho2 = rho * rho;
    weighted_rank_one(h, rho2, (1.0 - rho2) * error_variance)
}

/// `a · v vᴴ + b · I`.
fn weighted_rank_one(v: &[C64], a: f64, b: f64) -> CMatrix {
    let mut out = CMatrix::outer(v).scaled(a);
    for k in 0..v.len() {
        out[(k, k)] += C64::new(b, 0.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_scenario;

    fn random_channel_set(cfg: &SystemConfig, seed: u64) -> ChannelSet {
        generate_scenario(seed, cfg).unwrap()
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = SystemConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.power_w, 1.0);
        assert!((cfg.data_receivers[0].noise_power_w - 1e-8).abs() < 1e-22);
        assert!((cfg.data_receivers[0].sinr_threshold - 10.0).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let cfg = SystemConfig::default().with_csi_accuracy(0.0);
        assert!(matches!(cfg.validate(), Err(ConfigError::OutOfRange { field: "csi_accuracy", .. })));
        let cfg = SystemConfig::default().with_port_stride(300);
        assert!(cfg.validate().is_err());
        let cfg = SystemConfig::default().with_receivers(0, 0);
        assert_eq!(cfg.validate(), Err(ConfigError::NoReceivers));
        let mut cfg = SystemConfig::default();
        cfg.power_w = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SystemConfig::default();
        cfg.tx_antennas = 0;
        assert_eq!(cfg.validate(), Err(ConfigError::ZeroCount("tx_antennas")));
    }

    #[test]
    fn unit_conversions() {
        assert_eq!(dbm_to_watts(30.0), 1.0);
        assert!((dbm_to_watts(-50.0) - 1e-8).abs() < 1e-22);
        assert!((watts_to_dbm(1.0) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn matched_filter_sinr() {
        let cfg = SystemConfig::default().with_receivers(1, 0).with_ports(3);
        let ch = random_channel_set(&cfg, 1);
        let h = ch.dr_links[0].estimated.port(1).to_vec();
        let norm = norm_sq(&h);
        let scale = (cfg.power_w / norm).sqrt();
        let mut sol = BeamformingSolution::zero(1, cfg.tx_antennas);
        sol.w[0] = h.iter().map(|x| x * scale).collect();
        let sinr = sinr_at_port(0, 1, &sol, &ch, &cfg).unwrap();
        let expect = cfg.power_w * norm / cfg.data_receivers[0].noise_power_w;
        assert!((sinr - expect).abs() < 1e-10 * expect);

        let zero = BeamformingSolution::zero(1, cfg.tx_antennas);
        assert_eq!(sinr_at_port(0, 1, &zero, &ch, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn energy_matched_beam() {
        let cfg = SystemConfig::default().with_receivers(0, 1).with_ports(2);
        let ch = random_channel_set(&cfg, 2);
        let g = ch.er_links[0].estimated.port(0).to_vec();
        let norm = norm_sq(&g);
        let mut sol = BeamformingSolution::zero(0, cfg.tx_antennas);
        sol.energy_covariance = CMatrix::outer(&g).scaled(cfg.power_w / norm);
        let eh = eh_power_at_port(0, 0, &sol, &ch, &cfg).unwrap();
        assert!((eh - cfg.power_w * norm).abs() < 1e-12 * eh);
        let zero = BeamformingSolution::zero(0, cfg.tx_antennas);
        assert_eq!(eh_power_at_port(0, 0, &zero, &ch, &cfg).unwrap(), 0.0);
        let ports = PortSelection { dr: vec![], er: vec![0] };
        assert_eq!(weighted_eh(&sol, &ports, &ch, &cfg).unwrap(), eh);
    }

    #[test]
    fn metrics_reject_mismatched_dimensions() {
        let cfg = SystemConfig::default().with_ports(4);
        let ch = random_channel_set(&cfg, 3);
        let bad = BeamformingSolution::zero(1, cfg.tx_antennas);
        assert!(matches!(sinr_at_port(0, 0, &bad, &ch, &cfg), Err(ModelError::Dimension(_))));
        let sol = BeamformingSolution::zero(2, cfg.tx_antennas);
        assert!(matches!(sinr_at_port(0, 9, &sol, &ch, &cfg), Err(ModelError::PortOutOfRange { .. })));
        assert!(matches!(eh_power_at_port(5, 0, &sol, &ch, &cfg), Err(ModelError::ReceiverOutOfRange { .. })));
    }

    #[test]
    fn perfect_csi_drops_identity_terms() {
        let cfg = SystemConfig::default().with_ports(3);
        let ch = random_channel_set(&cfg, 4);
        let ports = PortSelection { dr: vec![0, 2], er: vec![1, 1] };
        let h = ch.dr_links[0].estimated.port(0);
        let f = build_f_rd(0, &ports, &ch, &cfg).unwrap();
        let d = build_d_rd(0, &ports, &ch, &cfg).unwrap();
        assert!((&f - &CMatrix::outer(h)).max_abs() < 1e-18);
        assert!((&d - &CMatrix::outer(h)).max_abs() < 1e-18);
    }

    #[test]
    fn scalar_builders() {
        let mut cfg = SystemConfig::default().with_ports(1).with_csi_accuracy(0.5);
        cfg.tx_antennas = 1;
        let ch = random_channel_set(&cfg, 5);
        let ports = PortSelection { dr: vec![0, 0], er: vec![0, 0] };
        let h = ch.dr_links[1].estimated.port(0)[0].norm_sqr();
        let var = ch.dr_links[1].error_variance;
        let gamma = cfg.data_receivers[1].sinr_threshold;
        let f = build_f_rd(1, &ports, &ch, &cfg).unwrap()[(0, 0)].re;
        let d = build_d_rd(1, &ports, &ch, &cfg).unwrap()[(0, 0)].re;
        assert!((f - (0.25 * h - gamma * 0.75 * var)).abs() < 1e-15);
        assert!((d - (0.25 * h + 0.75 * var)).abs() < 1e-15);
        let s = build_s_re(&ports, &ch, &cfg).unwrap()[(0, 0)].re;
        let expect: f64 = ch.er_links.iter().map(|p| 0.25 * p.estimated.port(0)[0].norm_sqr() + 0.75 * p.error_variance).sum();
        assert!((s - expect).abs() < 1e-15);
    }
}
