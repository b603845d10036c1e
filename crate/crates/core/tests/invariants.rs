use faidet_core::channel::generate_scenario;
use faidet_core::linalg::{hermitian_eigen, CMatrix, C64};
use faidet_core::sysmodel::{eh_power_at_port, sinr_at_port, weighted_eh, BeamformingSolution, PortSelection, SystemConfig};
use faidet_core::{generate_mimo_scenario, port_correlation_mu};
use proptest::prelude::*;

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| C64::new(re, im)), len)
}

fn solution(m: usize) -> impl Strategy<Value = BeamformingSolution> {
    (complex_vec(m), complex_vec(m), complex_vec(m)).prop_map(move |(w1, w2, v)| {
        let mut s = BeamformingSolution::zero(2, m);
        s.w = vec![w1, w2];
        s.energy_covariance = CMatrix::outer(&v);
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correlation_is_a_coefficient(w in 1e-3f64..20.0) {
        let mu = port_correlation_mu(w).unwrap();
        prop_assert!((0.0..=1.0).contains(&mu));
    }

    #[test]
    fn fewer_ports_are_a_prefix(seed in any::<u64>(), n1 in 1usize..30, extra in 1usize..30) {
        let small = SystemConfig::default().with_ports(n1);
        let large = SystemConfig::default().with_ports(n1 + extra);
        let a = generate_scenario(seed, &small).unwrap();
        let b = generate_scenario(seed, &large).unwrap();
        for (x, y) in a.dr_links.iter().chain(&a.er_links).zip(b.dr_links.iter().chain(&b.er_links)) {
            for n in 0..n1 {
                prop_assert_eq!(x.estimated.port(n), y.estimated.port(n));
                prop_assert_eq!(x.true_channel.port(n), y.true_channel.port(n));
            }
        }
    }

    #[test]
    fn common_phase_changes_nothing(seed in any::<u64>(), sol in solution(4), theta in 0.0f64..6.3) {
        let cfg = SystemConfig::default().with_ports(8).with_csi_accuracy(0.9);
        let ch = generate_scenario(seed, &cfg).unwrap();
        let rotated = sol.with_phase(theta);
        for n in 0..8 {
            for i in 0..2 {
                let a = sinr_at_port(i, n, &sol, &ch, &cfg).unwrap();
                let b = sinr_at_port(i, n, &rotated, &ch, &cfg).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
                let a = eh_power_at_port(i, n, &sol, &ch, &cfg).unwrap();
                let b = eh_power_at_port(i, n, &rotated, &ch, &cfg).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
            }
        }
    }

    #[test]
    fn harvested_power_is_linear_in_weights(seed in any::<u64>(), sol in solution(4), b1 in 0.0f64..3.0, b2 in 0.0f64..3.0) {
        let mut cfg = SystemConfig::default().with_ports(4);
        cfg.energy_receivers[0].weight = b1;
        cfg.energy_receivers[1].weight = b2;
        let ch = generate_scenario(seed, &cfg).unwrap();
        let ports = PortSelection { dr: vec![0, 1], er: vec![2, 3] };
        let total = weighted_eh(&sol, &ports, &ch, &cfg).unwrap();
        let expect = b1 * eh_power_at_port(0, 2, &sol, &ch, &cfg).unwrap() + b2 * eh_power_at_port(1, 3, &sol, &ch, &cfg).unwrap();
        prop_assert!((total - expect).abs() <= 1e-12 * expect.max(1e-300));
    }

    #[test]
    fn eigen_reconstructs(v in complex_vec(16)) {
        let a = CMatrix::from_column_major(4, 4, v);
        let h = a.hermitian_part();
        let e = hermitian_eigen(&h);
        let mut rebuilt = CMatrix::zeros(4, 4);
        for k in 0..4 {
            rebuilt.add_scaled(e.values[k], &CMatrix::outer(e.vector(k)));
        }
        prop_assert!((&rebuilt - &h).max_abs() <= 1e-12 * (1.0 + h.max_abs()));
        prop_assert!(e.values.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn benchmark_channels_ignore_port_count(seed in any::<u64>(), n in 1usize..300) {
        let a = generate_mimo_scenario(seed, &SystemConfig::default().with_ports(n)).unwrap();
        let b = generate_mimo_scenario(seed, &SystemConfig::default()).unwrap();
        prop_assert_eq!(a, b);
    }
}
