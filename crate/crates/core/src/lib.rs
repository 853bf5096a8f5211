//! Simulator for quench circuits on a linear array of exchange-coupled spin qubits.
//!
//! The crate is organised bottom-up: [`state`] holds the dense state vector,
//! [`circuit`] builds and compiles timed gate lists, [`noise`] adds quasi-static
//! dephasing, [`measurement`] implements parity-mode readout, [`readout`] handles
//! the analog sensor pipeline, [`tomography`] reconstructs density matrices and
//! [`experiments`] ties everything together into sweeps. [`config`] parses the
//! `key = value` run files.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod config;
pub mod error;
pub mod experiments;
pub mod gates;
pub mod linalg;
pub mod measurement;
pub mod noise;
pub mod readout;
pub mod rng;
pub mod stats;
pub mod state;
pub mod tomography;
pub mod validate;

pub use circuit::{Circuit, DeviceParams, GateKind, GateOp, QuenchSpec, QuenchVariant};
pub use config::{load_config, parse_config, ComboSpec, RunConfig, ThetaRange};
pub use error::{Error, Result};
pub use experiments::{analytical_loschmidt, Combos, Estimator, RunContext, SweepPoint, SweepResult};
pub use gates::{Gate2, C64};
pub use measurement::{InitSource, Layout, ReadoutParams};
pub use noise::{NoiseConfig, T2Table};
pub use readout::{FitResult, SensorModel};
pub use state::{Projector, Spin, StateVector, MAX_QUBITS};
pub use stats::Estimate;
pub use tomography::{DensityMatrix, TomoData};
