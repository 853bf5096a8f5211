use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use quench_bench::{ghz_rho, noisy_context, random_state, sensor_voltages};
use quench_core::circuit::build_quench;
use quench_core::experiments::run_loschmidt;
use quench_core::gates::rx;
use quench_core::readout::fit_bimodal;
use quench_core::tomography::{mle_reconstruct, TomoData};
use quench_core::{Combos, DeviceParams, QuenchSpec, QuenchVariant, RunContext};

fn gates(c: &mut Criterion) {
    let mut g = c.benchmark_group("apply_1q");
    for n in [4, 7, 10] {
        let s = random_state(n, 7);
        let u = rx(0.3);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter_batched(|| s.clone(), |mut s| s.apply_1q(&u, 1).map(|_| s), criterion::BatchSize::SmallInput)
        });
    }
    g.finish();
}

fn quench_circuit(c: &mut Criterion) {
    let dev = DeviceParams::default();
    c.bench_function("full_quench_n6", |b| {
        b.iter(|| {
            let circ = build_quench(&QuenchSpec::chain(6, QuenchVariant::Full), black_box(0.9), &dev).unwrap();
            let mut s = quench_core::StateVector::all_down(6).unwrap();
            circ.apply(&mut s).unwrap();
            s
        })
    });
}

fn sweeps(c: &mut Criterion) {
    let mut g = c.benchmark_group("loschmidt_point");
    g.sample_size(10);
    let combo = Combos::List(vec![vec![1, 2, 3, 4]]);
    let ideal = RunContext::ideal();
    g.bench_function("ideal_n4", |b| b.iter(|| run_loschmidt(&ideal, 4, &combo, &[PI / 3.0]).unwrap()));
    let noisy = noisy_context(200);
    g.bench_function("noisy_n4_200_shots", |b| b.iter(|| run_loschmidt(&noisy, 4, &combo, &[PI / 3.0]).unwrap()));
    g.finish();
}

fn tomography(c: &mut Criterion) {
    let mut g = c.benchmark_group("mle");
    g.sample_size(10);
    for n in [2, 3] {
        let data = TomoData::sampled(&ghz_rho(n), 1000, 5).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, d| b.iter(|| mle_reconstruct(d).unwrap()));
    }
    g.finish();
}

fn bimodal(c: &mut Criterion) {
    let v = sensor_voltages(5000);
    c.bench_function("fit_bimodal_5000", |b| b.iter(|| fit_bimodal(black_box(&v), None)));
}

criterion_group!(benches, gates, quench_circuit, sweeps, tomography, bimodal);
criterion_main!(benches);
