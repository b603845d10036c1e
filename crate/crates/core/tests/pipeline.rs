use faidet_core::beamforming::P2Settings;
use faidet_core::sysmodel::{realized_weighted_eh, sinr_at_port};
use faidet_core::*;

#[test]
fn same_seed_same_result() {
    let cfg = SystemConfig::default().with_ports(40).with_csi_accuracy(0.95);
    let run = || optimize(&generate_scenario(trial_seed(9, 3), &cfg).unwrap(), &cfg).unwrap();
    assert_eq!(run(), run());
}

#[test]
fn perfect_csi_realizes_the_estimate() {
    let cfg = SystemConfig::default().with_ports(30);
    let ch = generate_scenario(trial_seed(1, 0), &cfg).unwrap();
    let res = optimize(&ch, &cfg).unwrap();
    let realized = realized_weighted_eh(&res.solution, &res.ports, &ch, &cfg).unwrap();
    assert!((realized - res.objective()).abs() <= 1e-12 * realized);
}

#[test]
fn final_beams_are_feasible_and_match_a_fresh_solve() {
    let cfg = SystemConfig::default().with_ports(60).with_csi_accuracy(0.9).with_port_stride(2);
    let mut feasible = 0;
    for k in 0..8 {
        let ch = generate_scenario(trial_seed(2, k), &cfg).unwrap();
        let res = optimize(&ch, &cfg).unwrap();
        if !res.is_feasible() {
            // Only the initial ports can be infeasible: later ports keep the previous beams feasible.
            assert_eq!(res.status, AoStatus::Infeasible { iteration: 0 });
            continue;
        }
        feasible += 1;
        assert!(res.ports.dr.iter().chain(&res.ports.er).all(|p| p % 2 == 0));
        for (i, rx) in cfg.data_receivers.iter().enumerate() {
            let sinr = sinr_at_port(i, res.ports.dr[i], &res.solution, &ch, &cfg).unwrap();
            assert!(sinr >= rx.sinr_threshold * (1.0 - 1e-6));
        }
        let fresh = solve_p2(&res.ports, &ch, &cfg, &P2Settings::default()).unwrap();
        assert!(res.objective() >= fresh.objective - 1e-8 * fresh.objective);
        assert!(res.objective() <= fresh.dual_bound + 1e-8 * fresh.objective);
    }
    assert!(feasible >= 4);
}

#[test]
fn more_ports_help_on_average() {
    let mean = |n: usize| {
        let cfg = SystemConfig::default().with_ports(n);
        (0..10).map(|k| optimize(&generate_scenario(trial_seed(3, k), &cfg).unwrap(), &cfg).unwrap().objective()).sum::<f64>()
    };
    assert!(mean(50) > mean(1));
}

#[test]
fn benchmark_runs_end_to_end() {
    let cfg = SystemConfig::default();
    let scenario = generate_mimo_scenario(trial_seed(4, 0), &cfg).unwrap();
    let res = optimize_mimo(&scenario, &cfg).unwrap();
    assert!(res.is_feasible());
    assert_eq!(res.combiners.len(), 2);
    assert!(res.combiners.iter().all(|u| u.len() == receive_antennas(0.5)));
    assert!(res.objective() > 0.0);
}
