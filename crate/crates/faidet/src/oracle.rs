//! Independent reference computations used by `selftest` and the
//! acceptance suite. None of them calls the code they check.

use faidet_core::channel::generate_estimated_channel;
use faidet_core::linalg::{CMatrix, C64};
use faidet_core::rng::{stream, Population, Purpose, StreamId};
use faidet_core::sysmodel::{BeamformingSolution, SystemConfig};
use rand::Rng;

/// `μ(W)` evaluated with mpmath at 50 significant digits, directly from
/// `√2 · √(₁F₂(½; 1, 3/2; −π²W²) − J₁(2πW)/(2πW))`.
pub const MU_REFERENCE: [(f64, f64); 9] = [
    (0.1, 0.991_822_593_868_640_659_7),
    (0.2, 0.967_853_346_138_691_827_3),
    (0.25, 0.950_424_115_929_666_692_6),
    (0.5, 0.822_599_623_583_469_775_6),
    (1.0, 0.556_107_207_024_927_611_3),
    (2.0, 0.396_664_784_074_121_879_0),
    (5.0, 0.251_924_182_354_000_324_9),
    (10.0, 0.178_313_205_070_113_584_6),
    (1e-4, 0.999_999_991_775_329_713_1),
];

/// Sample estimate with its standard error next to the theoretical value.
#[derive(Debug, Clone, Copy)]
pub struct Moment {
    pub estimate: f64,
    pub std_err: f64,
    pub theory: f64,
}

impl Moment {
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.theory) / self.std_err
    }

    fn from_samples(samples: &[f64], theory: f64) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Self { estimate: mean, std_err: (var / n).sqrt(), theory }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ChannelMoments {
    /// `E|h_n|²` per entry, pooled over both ports.
    pub variance: Moment,
    /// `Re E[h_1 h_2*] / σ²`, theory `μ²`.
    pub correlation: Moment,
    /// `Im E[h_1 h_2*] / σ²`, theory 0.
    pub correlation_imag: Moment,
}

/// Moments of `draws` single-antenna two-port channels with unit link gain.
pub fn channel_moments(draws: usize, mu: f64, seed: u64) -> ChannelMoments {
    let mut rng = stream(seed, StreamId::new(Population::Data, 0, Purpose::Estimate));
    let mut power = Vec::with_capacity(draws);
    let mut re = Vec::with_capacity(draws);
    let mut im = Vec::with_capacity(draws);
    for _ in 0..draws {
        let h = generate_estimated_channel(&mut rng, 1, 2, mu, 1.0).expect("valid parameters");
        let (a, b) = (h.port(0)[0], h.port(1)[0]);
        power.push(0.5 * (a.norm_sqr() + b.norm_sqr()));
        let c = a * b.conj();
        re.push(c.re);
        im.push(c.im);
    }
    ChannelMoments {
        variance: Moment::from_samples(&power, 1.0),
        correlation: Moment::from_samples(&re, mu * mu),
        correlation_imag: Moment::from_samples(&im, 0.0),
    }
}

/// First index of the largest metric, scanning `ports` in order.
pub fn brute_force_port(ports: &[usize], mut metric: impl FnMut(usize) -> f64) -> usize {
    let mut best = (ports[0], metric(ports[0]));
    for &n in &ports[1..] {
        let v = metric(n);
        if v > best.1 {
            best = (n, v);
        }
    }
    best.0
}

/// Random beams with total power below `cfg.power_w` and a random rank-one
/// or rank-two energy covariance.
pub fn random_solution<R: Rng>(rng: &mut R, cfg: &SystemConfig) -> BeamformingSolution {
    let m = cfg.tx_antennas;
    let vec = |rng: &mut R| -> Vec<C64> { (0..m).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect() };
    let mut sol = BeamformingSolution::zero(cfg.num_dr(), m);
    for w in &mut sol.w {
        *w = vec(rng);
    }
    let beams = rng.random_range(0..=2);
    for _ in 0..beams {
        let v = vec(rng);
        sol.energy_covariance += &CMatrix::outer(&v);
    }
    let scale = cfg.power_w / sol.total_power().max(f64::MIN_POSITIVE) * rng.random_range(0.1..1.0);
    for w in &mut sol.w {
        w.iter_mut().for_each(|x| *x *= scale.sqrt());
    }
    sol.energy_covariance.scale_mut(scale);
    sol
}

/// One DR, one ER, two transmit antennas, perfect CSI.
#[derive(Debug, Clone, Copy)]
pub struct TwoByOne {
    pub h: [C64; 2],
    pub g: [C64; 2],
    pub power_w: f64,
    pub noise_w: f64,
    pub sinr_threshold: f64,
    pub weight: f64,
}

/// Best rank-one point on a grid of `dir_steps²` information-beam
/// directions times `split_steps` power splits.
///
/// The direction of the information beam `w` is gridded on the Bloch
/// sphere; `w` gets a fraction `t` of the power. For fixed `w` the best
/// energy beam is found exactly: writing `v = x e₁ + y e₂` with
/// `e₁ = h/‖h‖`, the objective `|gᴴv|²` is at most `(|x||g₁| + |y||g₂|)²`
/// (equality when the phases align), and the SINR allows
/// `|x|² ≤ (|hᴴw|²/γ − σ²)/‖h‖²`.
pub fn grid_search_rank1(p: &TwoByOne, dir_steps: usize, split_steps: usize) -> Option<f64> {
    let h_norm = (p.h[0].norm_sqr() + p.h[1].norm_sqr()).sqrt();
    let e1 = [p.h[0] / h_norm, p.h[1] / h_norm];
    let e2 = [-p.h[1].conj() / h_norm, p.h[0].conj() / h_norm];
    let proj = |e: [C64; 2]| (e[0].conj() * p.g[0] + e[1].conj() * p.g[1]).norm();
    let (g1, g2) = (proj(e1), proj(e2));
    let g_norm = (g1 * g1 + g2 * g2).sqrt();

    let mut best: Option<f64> = None;
    for i in 0..dir_steps {
        // Polar angle of the Bloch vector, endpoints included.
        let theta = core::f64::consts::PI * i as f64 / (dir_steps - 1) as f64;
        for j in 0..dir_steps {
            let phi = core::f64::consts::TAU * j as f64 / dir_steps as f64;
            let a = [C64::new((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)];
            let ha = (p.h[0].conj() * a[0] + p.h[1].conj() * a[1]).norm_sqr();
            let ga = (p.g[0].conj() * a[0] + p.g[1].conj() * a[1]).norm_sqr();
            for k in 0..split_steps {
                let t = (k + 1) as f64 / split_steps as f64;
                let pw = t * p.power_w;
                let allowance = pw * ha / p.sinr_threshold - p.noise_w;
                if allowance < 0.0 {
                    continue;
                }
                let q = p.power_w - pw;
                let x_max = (allowance / (h_norm * h_norm)).sqrt();
                let (mut x, mut y) = if g_norm > 0.0 { (q.sqrt() * g1 / g_norm, q.sqrt() * g2 / g_norm) } else { (0.0, q.sqrt()) };
                if x > x_max {
                    x = x_max.min(q.sqrt());
                    y = (q - x * x).max(0.0).sqrt();
                }
                let energy = (x * g1 + y * g2).powi(2);
                let value = p.weight * (pw * ga + energy);
                if best.is_none_or(|b| value > b) {
                    best = Some(value);
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn brute_force_breaks_ties_low() {
        assert_eq!(brute_force_port(&[2, 4, 6], |_| 0.0), 2);
        assert_eq!(brute_force_port(&[2, 4, 6], |n| -(n as f64 - 4.0).abs()), 4);
    }

    #[test]
    fn moments_of_a_small_sample_are_sane() {
        let m = channel_moments(2000, 0.8, 1);
        assert!(m.variance.z_score().abs() < 5.0);
        assert!(m.correlation.z_score().abs() < 5.0);
    }

    #[test]
    fn random_solution_respects_power() {
        let cfg = SystemConfig::default();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let s = random_solution(&mut rng, &cfg);
            assert!(s.total_power() <= cfg.power_w * (1.0 + 1e-12));
        }
    }

    #[test]
    fn grid_hits_matched_beam_when_aligned() {
        // h and g parallel: all power on g meets any SINR target here.
        let g = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let p = TwoByOne { h: g, g, power_w: 1.0, noise_w: 1e-3, sinr_threshold: 10.0, weight: 1.0 };
        let best = grid_search_rank1(&p, 21, 20).unwrap();
        assert!((best - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_channels_need_power_split() {
        let p = TwoByOne {
            h: [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            g: [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            power_w: 1.0,
            noise_w: 0.01,
            sinr_threshold: 10.0,
            weight: 1.0,
        };
        // w must carry 0.1 W along h; the remaining 0.9 W goes to g.
        let best = grid_search_rank1(&p, 21, 100).unwrap();
        assert!((best - 0.9).abs() < 1e-12, "{best}");
        let tight = TwoByOne { sinr_threshold: 1000.0, ..p };
        assert!(grid_search_rank1(&tight, 21, 100).is_none());
    }
}
