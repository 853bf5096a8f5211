//! Monte-Carlo and fitting checks that need many samples.

use std::f64::consts::PI;

use quench_core::experiments::run_loschmidt;
use quench_core::readout::{classify, fit_bimodal, synth_batch, Drift};
use quench_core::rng::stream;
use quench_core::stats::linear_fit;
use quench_core::tomography::{bootstrap_errorbars, fidelity, mle_reconstruct, TomoData};
use quench_core::{
    analytical_loschmidt, Combos, DensityMatrix, NoiseConfig, RunContext, SensorModel, StateVector, T2Table, C64,
};
use rand::Rng;

fn bell() -> StateVector {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    StateVector::from_amplitudes(vec![one, z, z, one]).unwrap()
}

/// Bootstrap spread of a mixed-state fidelity scales as shots^(-1/2).
#[test]
fn bootstrap_sigma_scales_with_shots() {
    let psi = bell();
    let pure = DensityMatrix::from_pure(&psi).unwrap();
    let mixed = DensityMatrix::new(pure.matrix() * C64::new(0.7, 0.0) + DensityMatrix::maximally_mixed(2).unwrap().matrix() * C64::new(0.3, 0.0)).unwrap();
    let shots = [100u64, 1000, 10_000];
    let sigmas: Vec<f64> = shots
        .iter()
        .map(|&k| {
            let data = TomoData::sampled(&mixed, k, 5).unwrap();
            let s = bootstrap_errorbars(&data, 100, 6, |d| Ok(vec![fidelity(&mle_reconstruct(d)?.rho, &psi)?])).unwrap();
            s[0]
        })
        .collect();
    let x: Vec<f64> = shots.iter().map(|&k| (k as f64).log10()).collect();
    let y: Vec<f64> = sigmas.iter().map(|s| s.log10()).collect();
    let (_, slope) = linear_fit(&x, &y);
    assert!((slope + 0.5).abs() <= 0.1, "slope {slope}, sigmas {sigmas:?}");
}

/// Shorter coherence lowers the oscillation contrast of a paired run.
#[test]
fn halving_t2_lowers_visibility() {
    let grid = [0.0, PI / 4.0, PI / 2.0];
    let combo = Combos::List(vec![vec![1, 2, 3]]);
    let base = RunContext { noise: NoiseConfig::default().with_seed(4), shots: 3000, ..Default::default() };
    let halved = RunContext {
        noise: NoiseConfig { t2: T2Table::default().scaled(0.5), ..base.noise.clone() },
        ..base.clone()
    };
    let ideal: Vec<f64> = grid.iter().map(|&t| analytical_loschmidt(3, t)).collect();
    let slope = |ctx: &RunContext| {
        let run = run_loschmidt(ctx, 3, &combo, &grid).unwrap();
        linear_fit(&ideal, &run.average.defined_means()).1
    };
    let (a, b) = (slope(&base), slope(&halved));
    assert!(b < a, "visibility {a} -> {b}");
}

fn bits(n: usize, p_even: f64, seed: u64) -> Vec<u8> {
    let mut rng = stream(&[seed]);
    (0..n).map(|_| u8::from(rng.random::<f64>() < p_even)).collect()
}

/// Centers 8σ apart: the fitted threshold assigns almost every shot correctly,
/// and no fixed threshold 2σ away does better.
#[test]
fn wide_separation_assignment_fidelity() {
    let model = SensorModel { v_odd: 0.0, v_even: 16.0, drift: Drift::default(), seed: 3, ..Default::default() };
    let truth = bits(20_000, 0.5, 8);
    let batch = synth_batch(&truth, &model, 0.0, 0).unwrap();
    let fit = fit_bimodal(&batch.voltages, None);
    assert!(fit.converged);
    let got = classify(&batch.voltages, fit.threshold, model.polarity());
    let correct = got.iter().zip(&truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64;
    assert!(correct > 0.9999, "assignment fidelity {correct}");

    let err = |t: f64| 0.5 * (model.misassignment(0, t) + model.misassignment(1, t));
    assert!(err(fit.threshold) <= err(fit.threshold + 2.0 * model.sigma_even) + 1e-15);
    assert!(err(fit.threshold) <= err(fit.threshold - 2.0 * model.sigma_odd) + 1e-15);
}

/// Once drift exceeds 1σ a refitted threshold beats the stale one.
#[test]
fn rethreshold_beats_stale_threshold_under_drift() {
    let model = SensorModel { drift: Drift { linear_mv_per_ns: 0.02, ..Default::default() }, seed: 12, ..Default::default() };
    let truth = bits(5000, 0.5, 9);
    let stale = fit_bimodal(&synth_batch(&truth, &model.without_drift(), 0.0, 0).unwrap().voltages, None).threshold;
    for burst in [150.0, 250.0, 400.0] {
        assert!(model.drift.offset(burst) > model.sigma_even);
        let v = synth_batch(&truth, &model, burst, 1).unwrap().voltages;
        let score = |t: f64| classify(&v, t, model.polarity()).iter().zip(&truth).filter(|(a, b)| a == b).count();
        let fresh = fit_bimodal(&v, None);
        assert!(fresh.converged);
        assert!(score(fresh.threshold) > score(stale), "burst {burst} ns");
    }
}
