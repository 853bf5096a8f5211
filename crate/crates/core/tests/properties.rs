//! Randomized invariants of the simulator.

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use quench_core::circuit::{build_quench, circuit_unitary};
use quench_core::experiments::circuit_loschmidt;
use quench_core::gates::{rx, ry, rz};
use quench_core::{
    analytical_loschmidt, parse_config, DeviceParams, QuenchSpec, QuenchVariant, StateVector, C64,
};

fn amplitudes(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n)
        .prop_filter("non-zero vector", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotations_preserve_norm(amps in amplitudes(4), q in 1usize..=4, a in -PI..PI, axis in 0usize..3) {
        let mut s = StateVector::from_amplitudes(amps).unwrap();
        let g = [rx(a), ry(a), rz(a)][axis];
        s.apply_1q(&g, q).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn return_probability_has_period_pi(n in 3usize..=8, theta in -PI..PI) {
        let a = analytical_loschmidt(n, theta);
        let b = analytical_loschmidt(n, theta + PI);
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
    }

    #[test]
    fn circuit_matches_closed_form(n in 2usize..=7, theta in -PI..PI) {
        let l = circuit_loschmidt(n, theta, &DeviceParams::default()).unwrap();
        prop_assert!((l - analytical_loschmidt(n, theta)).abs() < 1e-10);
    }

    #[test]
    fn quench_unitary_is_unitary(n in 2usize..=4, theta in -PI..PI) {
        let c = build_quench(&QuenchSpec::chain(n, QuenchVariant::Full), theta, &DeviceParams::default()).unwrap();
        let u = circuit_unitary(&c).unwrap();
        let dev = (u.adjoint() * &u - nalgebra_identity(1 << n)).norm();
        prop_assert!(dev < 1e-10);
    }

    #[test]
    fn config_echo_round_trips(n in 1usize..=6, shots in 1usize..100_000, seed in any::<u64>(), t_pi in 10.0f64..500.0) {
        let text = format!("n = {n}\nshots = {shots}\nseed = {seed}\nt_pi = {t_pi}ns\n");
        let cfg = parse_config(&text).unwrap();
        let again = parse_config(&cfg.echo()).unwrap();
        prop_assert_eq!(cfg, again);
    }
}

fn nalgebra_identity(d: usize) -> quench_core::linalg::CMatrix {
    quench_core::linalg::CMatrix::identity(d, d)
}

#[test]
fn six_qubit_critical_value() {
    let dev = DeviceParams::default();
    assert_abs_diff_eq!(circuit_loschmidt(6, PI / 2.0, &dev).unwrap(), 1.0 / 64.0, epsilon = 1e-12);
    assert_abs_diff_eq!(circuit_loschmidt(4, 0.7, &dev).unwrap(), analytical_loschmidt(4, 0.7), epsilon = 1e-12);
}
