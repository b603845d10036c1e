//! Oracle checks shared by the `selftest` command and the acceptance suite.

use faidet_core::beamforming::P2Settings;
use faidet_core::linalg::hermitian_eigen;
use faidet_core::sysmodel::{build_s_re, dbm_to_watts};
use faidet_core::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::oracle::{brute_force_port, grid_search_rank1, random_solution, TwoByOne, MU_REFERENCE};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// `μ(W)` against the frozen extended-precision values.
pub fn check_mu() -> Check {
    let mut worst = 0.0f64;
    let mut failure = None;
    for (w, reference) in MU_REFERENCE {
        match port_correlation_mu(w) {
            Ok(mu) => worst = worst.max(((mu - reference) / reference).abs()),
            Err(e) => failure = Some(format!("W = {w}: {e}")),
        }
    }
    let limit = port_correlation_mu(1e-4).map(|mu| (mu - 1.0).abs()).unwrap_or(f64::INFINITY);
    let passed = failure.is_none() && worst < 1e-8 && limit < 1e-6;
    let detail = failure.unwrap_or_else(|| format!("max relative error {worst:.2e}, |mu(1e-4) - 1| = {limit:.2e}"));
    Check { name: "port correlation", passed, detail }
}

/// Closed-form port choices against exhaustive scans over random beams.
pub fn check_port_selection(instances: usize, seed: u64) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut mismatches = 0;
    let mut errors = 0;
    for k in 0..instances {
        let cfg = SystemConfig::default()
            .with_ports(50)
            .with_csi_accuracy(rng.random_range(0.5..=1.0))
            .with_antenna_size(rng.random_range(0.05..3.0))
            .with_port_stride(rng.random_range(1..=5));
        let Ok(ch) = generate_scenario(trial_seed(seed, k as u64), &cfg) else {
            errors += 1;
            continue;
        };
        let sol = random_solution(&mut rng, &cfg);
        for j in 0..cfg.num_er() {
            let expect = brute_force_port(&ch.selected_ports, |n| eh_power_at_port(j, n, &sol, &ch, &cfg).unwrap_or(f64::NAN));
            match select_er_port(j, &sol, &ch, &cfg) {
                Ok(n) if n == expect => {}
                Ok(_) => mismatches += 1,
                Err(_) => errors += 1,
            }
        }
        for i in 0..cfg.num_dr() {
            let expect = brute_force_port(&ch.selected_ports, |n| sinr_at_port(i, n, &sol, &ch, &cfg).unwrap_or(f64::NAN));
            match select_dr_port(i, &sol, &ch, &cfg) {
                Ok(n) if n == expect => {}
                Ok(_) => mismatches += 1,
                Err(_) => errors += 1,
            }
        }
    }
    Check {
        name: "port selection",
        passed: mismatches == 0 && errors == 0,
        detail: format!("{instances} instances, {mismatches} mismatches, {errors} errors"),
    }
}

/// Energy-only problems, whose optimum is `P · λ_max(S)`.
pub fn check_energy_closed_form(instances: usize, seed: u64) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut errors = 0;
    for k in 0..instances {
        let mut cfg = SystemConfig::default().with_ports(20).with_receivers(0, rng.random_range(1..=3));
        cfg = cfg.with_csi_accuracy(rng.random_range(0.0..=1.0));
        for r in &mut cfg.energy_receivers {
            r.weight = rng.random_range(0.1..2.0);
        }
        let Ok(ch) = generate_scenario(trial_seed(seed, k as u64), &cfg) else {
            errors += 1;
            continue;
        };
        let ports = PortSelection { dr: vec![], er: (0..cfg.num_er()).map(|_| rng.random_range(0..cfg.ports)).collect() };
        let s = build_s_re(&ports, &ch, &cfg).expect("valid ports");
        let expect = cfg.power_w * hermitian_eigen(&s).max();
        match solve_p2(&ports, &ch, &cfg, &P2Settings::default()) {
            Ok(p2) => worst = worst.max(((p2.objective - expect) / expect).abs()),
            Err(_) => errors += 1,
        }
    }
    Check {
        name: "energy-only closed form",
        passed: errors == 0 && worst <= 1e-6,
        detail: format!("{instances} instances, max relative error {worst:.2e}, {errors} errors"),
    }
}

/// Two-antenna single-DR single-ER instances with a binding SINR target,
/// solved both ways.
pub fn check_grid(instances: usize, seed: u64) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut solved = 0;
    let mut worst_below = 0.0f64;
    let mut worst_above = 0.0f64;
    let mut errors = 0;
    let mut trial = 0u64;
    while solved < instances && trial < 50 * instances as u64 {
        trial += 1;
        let mut cfg = SystemConfig { tx_antennas: 2, ..SystemConfig::default() }.with_ports(1).with_receivers(1, 1);
        cfg.data_receivers[0].noise_power_w = dbm_to_watts(rng.random_range(-25.0..-5.0));
        let Ok(ch) = generate_scenario(trial_seed(seed, trial), &cfg) else {
            errors += 1;
            continue;
        };
        let col = |l: &CsiPair| [l.estimated.port(0)[0], l.estimated.port(0)[1]];
        let problem = TwoByOne {
            h: col(&ch.dr_links[0]),
            g: col(&ch.er_links[0]),
            power_w: cfg.power_w,
            noise_w: cfg.data_receivers[0].noise_power_w,
            sinr_threshold: cfg.data_receivers[0].sinr_threshold,
            weight: cfg.energy_receivers[0].weight,
        };
        let Some(grid) = grid_search_rank1(&problem, 20, 25) else { continue };
        let ports = PortSelection { dr: vec![0], er: vec![0] };
        match solve_p2(&ports, &ch, &cfg, &P2Settings::default()) {
            Ok(p2) => {
                solved += 1;
                worst_below = worst_below.max((grid - p2.objective) / grid);
                worst_above = worst_above.max((p2.objective - grid) / grid);
            }
            Err(_) => errors += 1,
        }
    }
    Check {
        name: "relaxation vs grid search",
        passed: solved == instances && errors == 0 && worst_below <= 1e-9 && worst_above <= 0.02,
        detail: format!(
            "{solved} instances, relaxation below grid by at most {worst_below:.2e}, above by at most {:.3}%, {errors} errors",
            100.0 * worst_above
        ),
    }
}

/// The quick suite run by the `selftest` command.
pub fn run_all() -> Vec<Check> {
    vec![check_mu(), check_port_selection(40, 11), check_energy_closed_form(10, 12), check_grid(5, 13)]
}
