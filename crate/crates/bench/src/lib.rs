//! Shared fixtures for the criterion benches.

use quench_core::readout::synth_batch;
use quench_core::rng::stream;
use quench_core::tomography::ghz_state;
use quench_core::{DensityMatrix, NoiseConfig, RunContext, SensorModel, StateVector, C64};
use rand::Rng;

/// A normalized pseudo-random state on `n` qubits.
pub fn random_state(n: usize, seed: u64) -> StateVector {
    let mut rng = stream(&[seed]);
    let amps = (0..1usize << n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    StateVector::from_amplitudes(amps).expect("supported size and non-zero amplitudes")
}

/// Default noise and readout with `shots` per point.
pub fn noisy_context(shots: usize) -> RunContext {
    RunContext { noise: NoiseConfig::default().with_seed(1), shots, ..Default::default() }
}

pub fn ghz_rho(n: usize) -> DensityMatrix {
    DensityMatrix::from_pure(&ghz_state(n, 0.4).expect("valid size")).expect("pure state")
}

/// A balanced two-mode sensor batch of `shots` samples.
pub fn sensor_voltages(shots: usize) -> Vec<f64> {
    let mut rng = stream(&[2]);
    let bits: Vec<u8> = (0..shots).map(|_| u8::from(rng.random::<bool>())).collect();
    let model = SensorModel { seed: 3, ..Default::default() };
    synth_batch(&bits, &model.without_drift(), 0.0, 0).expect("valid model").voltages
}
