//! Quasi-static dephasing.
//!
//! Each shot draws a frequency detuning per qubit and exchange regime from a
//! zero-mean Gaussian of width `σ_f = 1/(√2·π·T2*)`. Detunings stay fixed for
//! the whole shot. Drive pulses become off-resonant rotations, every other qubit
//! precesses about Z for the duration of each op, and exchange windows use the
//! "exchange on" dephasing times for the coupled pair.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{zz_phases, Circuit, DeviceParams, GateKind, GateOp};
use crate::error::{invalid, Error, Result};
use crate::gates::{rz, su2_exp};
use crate::rng::{stream, tag};
use crate::state::StateVector;
use crate::stats::Estimate;

pub const DEFAULT_T2_OFF_US: f64 = 3.0;
pub const DEFAULT_T2_ON_US: f64 = 2.0;
pub const DEFAULT_F_RABI_MHZ: f64 = 5.0;

/// State of the exchange partner when looking up an "exchange on" T2*.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NeighborState {
    Down,
    Up,
    /// Partner not in a Z eigenstate; use the average over both.
    Avg,
}

impl NeighborState {
    fn index(self) -> u64 {
        match self {
            NeighborState::Down => 0,
            NeighborState::Up => 1,
            NeighborState::Avg => 2,
        }
    }

    /// Eigenstate test with a 1e-9 margin.
    pub fn of(s: &StateVector, q: usize) -> Result<Self> {
        let p = s.prob_up(q)?;
        Ok(if p < 1e-9 {
            NeighborState::Down
        } else if p > 1.0 - 1e-9 {
            NeighborState::Up
        } else {
            NeighborState::Avg
        })
    }
}

/// Exchange regime in which a detuning is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    Off,
    On { neighbor: usize, state: NeighborState },
}

impl Regime {
    fn id(self) -> u64 {
        match self {
            Regime::Off => 0,
            Regime::On { neighbor, state } => 1 + 3 * neighbor as u64 + state.index(),
        }
    }
}

/// Dephasing times in µs. Lookups fall back from the specific entry to the
/// per-qubit average and then to the table default.
#[derive(Debug, Clone, PartialEq)]
pub struct T2Table {
    pub default_off_us: f64,
    pub default_on_us: f64,
    pub off: BTreeMap<usize, f64>,
    pub on: BTreeMap<(usize, usize, NeighborState), f64>,
}

impl Default for T2Table {
    fn default() -> Self {
        T2Table {
            default_off_us: DEFAULT_T2_OFF_US,
            default_on_us: DEFAULT_T2_ON_US,
            off: BTreeMap::new(),
            on: BTreeMap::new(),
        }
    }
}

impl T2Table {
    /// Same T2* everywhere.
    pub fn uniform(t2_us: f64) -> Self {
        T2Table { default_off_us: t2_us, default_on_us: t2_us, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.default_off_us, self.default_on_us]
            .into_iter()
            .chain(self.off.values().copied())
            .chain(self.on.values().copied());
        for v in all {
            if !(v > 0.0) {
                return Err(invalid(format!("T2* must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn lookup(&self, q: usize, regime: Regime) -> f64 {
        match regime {
            Regime::Off => self.off.get(&q).copied().unwrap_or(self.default_off_us),
            Regime::On { neighbor, state } => {
                if let Some(v) = self.on.get(&(q, neighbor, state)) {
                    return *v;
                }
                let up = self.on.get(&(q, neighbor, NeighborState::Up));
                let down = self.on.get(&(q, neighbor, NeighborState::Down));
                match (up, down) {
                    (Some(a), Some(b)) => 0.5 * (a + b),
                    (Some(a), None) | (None, Some(a)) => *a,
                    (None, None) => self.default_on_us,
                }
            }
        }
    }

    /// Multiplies every entry by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        T2Table {
            default_off_us: self.default_off_us * k,
            default_on_us: self.default_on_us * k,
            off: self.off.iter().map(|(q, v)| (*q, v * k)).collect(),
            on: self.on.iter().map(|(q, v)| (*q, v * k)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub t2: T2Table,
    pub f_rabi_mhz: BTreeMap<usize, f64>,
    pub f_rabi_default_mhz: f64,
    pub base_seed: u64,
    pub enabled: bool,
    /// Reuse one standard-normal draw for all regimes of a qubit.
    pub correlate_regimes: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            t2: T2Table::default(),
            f_rabi_mhz: BTreeMap::new(),
            f_rabi_default_mhz: DEFAULT_F_RABI_MHZ,
            base_seed: 0,
            enabled: true,
            correlate_regimes: false,
        }
    }
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        NoiseConfig { enabled: false, ..Default::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn f_rabi(&self, q: usize) -> f64 {
        self.f_rabi_mhz.get(&q).copied().unwrap_or(self.f_rabi_default_mhz)
    }

    /// Lists qubits whose Rabi frequency is not well above the detuning spread.
    pub fn weak_drive_qubits(&self, n: usize) -> Vec<usize> {
        (1..=n)
            .filter(|&q| {
                let sigma_mhz = sigma_f_hz(self.t2.lookup(q, Regime::Off)) * 1e-6;
                self.f_rabi(q) < 10.0 * sigma_mhz
            })
            .collect()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.t2.validate()?;
        let weak = self.weak_drive_qubits(n);
        if self.enabled && !weak.is_empty() {
            warn!("Rabi frequency comparable to detuning spread on qubits {weak:?}");
        }
        Ok(())
    }
}

/// `σ_f = 1/(√2·π·T2*)` in Hz for `T2*` in µs.
pub fn sigma_f_hz(t2_us: f64) -> f64 {
    if t2_us.is_infinite() {
        return 0.0;
    }
    1e6 / (2f64.sqrt() * PI * t2_us)
}

pub fn sample_detuning<R: Rng + ?Sized>(t2_us: f64, rng: &mut R) -> Result<f64> {
    if !(t2_us > 0.0) {
        return Err(invalid(format!("T2* must be positive, got {t2_us}")));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(z * sigma_f_hz(t2_us))
}

/// Z precession by `2π·f·t` with `t` in ns.
pub fn idle_dephase(s: &mut StateVector, q: usize, duration_ns: f64, f_hz: f64) -> Result<()> {
    if f_hz == 0.0 || duration_ns == 0.0 {
        return Ok(());
    }
    s.apply_1q(&rz(2.0 * PI * f_hz * duration_ns * 1e-9), q)
}

/// Off-resonant X rotation `exp(-i/2 (θ_ε Z + θ X))`, `θ_ε = 2π·f·(|θ|/π)·t_π`.
pub fn noisy_drive(s: &mut StateVector, q: usize, theta: f64, f_hz: f64, t_pi_ns: f64) -> Result<()> {
    let eps = drive_detuning_angle(theta, f_hz, t_pi_ns)?;
    s.apply_1q(&su2_exp(theta, 0.0, eps), q)
}

/// As [`noisy_drive`] about the Y axis.
pub fn noisy_drive_y(s: &mut StateVector, q: usize, theta: f64, f_hz: f64, t_pi_ns: f64) -> Result<()> {
    let eps = drive_detuning_angle(theta, f_hz, t_pi_ns)?;
    s.apply_1q(&su2_exp(0.0, theta, eps), q)
}

fn drive_detuning_angle(theta: f64, f_hz: f64, t_pi_ns: f64) -> Result<f64> {
    if !(t_pi_ns > 0.0) {
        return Err(invalid(format!("t_pi must be positive, got {t_pi_ns}")));
    }
    Ok(2.0 * PI * f_hz * theta.abs() / PI * t_pi_ns * 1e-9)
}

/// Identifies one shot within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShotKey {
    pub seed: u64,
    pub point: u64,
    pub shot: u64,
}

impl ShotKey {
    pub fn new(seed: u64, point: u64, shot: u64) -> Self {
        ShotKey { seed, point, shot }
    }

    pub fn stream(&self, tag: u64) -> rand_chacha::ChaCha8Rng {
        stream(&[self.seed, self.point, self.shot, tag])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningSample {
    pub qubit: usize,
    pub regime: Regime,
    pub hz: f64,
}

/// Lazily sampled, per-shot detunings. Every `(qubit, regime)` pair has its own
/// counter-based stream, so the value does not depend on lookup order.
#[derive(Debug, Clone)]
pub struct Detunings<'a> {
    noise: &'a NoiseConfig,
    key: ShotKey,
    cache: BTreeMap<(usize, Regime), f64>,
}

impl<'a> Detunings<'a> {
    pub fn new(noise: &'a NoiseConfig, key: ShotKey) -> Self {
        Detunings { noise, key, cache: BTreeMap::new() }
    }

    pub fn get(&mut self, q: usize, regime: Regime) -> f64 {
        if !self.noise.enabled {
            return 0.0;
        }
        let noise = self.noise;
        let key = self.key;
        *self.cache.entry((q, regime)).or_insert_with(|| {
            let rid = if noise.correlate_regimes { 0 } else { regime.id() };
            let mut rng = stream(&[key.seed, key.point, key.shot, tag::DETUNING, q as u64, rid]);
            let z: f64 = rng.sample(StandardNormal);
            z * sigma_f_hz(noise.t2.lookup(q, regime))
        })
    }

    pub fn samples(&self) -> Vec<DetuningSample> {
        self.cache.iter().map(|(&(qubit, regime), &hz)| DetuningSample { qubit, regime, hz }).collect()
    }
}

/// Applies native ops under quasi-static noise.
pub fn apply_ops_noisy(
    ops: &[GateOp],
    dev: &DeviceParams,
    s: &mut StateVector,
    det: &mut Detunings<'_>,
) -> Result<()> {
    let n = s.n_qubits();
    for op in ops {
        match (op.kind, op.q2) {
            (GateKind::Rz, _) => crate::circuit::apply_op(s, op)?,
            (GateKind::Rx, _) | (GateKind::Ry, _) => {
                let f = det.get(op.q, Regime::Off);
                if op.kind == GateKind::Rx {
                    noisy_drive(s, op.q, op.angle, f, dev.t_pi(op.q))?;
                } else {
                    noisy_drive_y(s, op.q, op.angle, f, dev.t_pi(op.q))?;
                }
                for q in (1..=n).filter(|&q| q != op.q) {
                    let f = det.get(q, Regime::Off);
                    idle_dephase(s, q, op.duration_ns, f)?;
                }
            }
            (GateKind::Idle, _) => {
                for q in 1..=n {
                    let f = det.get(q, Regime::Off);
                    idle_dephase(s, q, op.duration_ns, f)?;
                }
            }
            (GateKind::Zz | GateKind::Cz, Some(b)) => {
                let a = op.q;
                let state_a = NeighborState::of(s, a)?;
                let state_b = NeighborState::of(s, b)?;
                let fa = det.get(a, Regime::On { neighbor: b, state: state_b });
                let fb = det.get(b, Regime::On { neighbor: a, state: state_a });
                if op.kind == GateKind::Zz {
                    s.apply_controlled_phase(a, b, &zz_phases(op.angle))?;
                } else {
                    crate::circuit::apply_op(s, op)?;
                }
                idle_dephase(s, a, op.duration_ns, fa)?;
                idle_dephase(s, b, op.duration_ns, fb)?;
                for q in (1..=n).filter(|&q| q != a && q != b) {
                    let f = det.get(q, Regime::Off);
                    idle_dephase(s, q, op.duration_ns, f)?;
                }
            }
            (GateKind::Cnot, Some(b)) => {
                let native = crate::circuit::compile_cnot(op.q, b, dev)?;
                apply_ops_noisy(&native, dev, s, det)?;
            }
            (kind, None) => return Err(invalid(format!("{kind:?} needs two qubits"))),
        }
    }
    Ok(())
}

/// Runs a circuit in place, exactly when noise is disabled.
pub fn run_circuit(c: &Circuit, s: &mut StateVector, det: &mut Detunings<'_>) -> Result<()> {
    if s.n_qubits() != c.n_qubits() {
        return Err(Error::DimensionMismatch(s.n_qubits(), c.n_qubits()));
    }
    if !det.noise.enabled {
        return c.apply(s);
    }
    apply_ops_noisy(c.ops(), c.device(), s, det)
}

/// One Monte-Carlo shot: sampled detunings, measurement bits and retention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot_index: u64,
    pub detunings: Vec<DetuningSample>,
    pub bits: Vec<(String, u8)>,
    pub retained: bool,
    pub indicator: Option<bool>,
}

impl ShotRecord {
    /// Shot log line: index, retained flag, then bits in sequence order.
    pub fn log_line(&self) -> String {
        let bits: Vec<String> = self.bits.iter().map(|(l, b)| format!("{l}={b}")).collect();
        format!("{},{},{}", self.shot_index, u8::from(self.retained), bits.join(" "))
    }
}

/// Runs one shot of `c` on `initial` and returns the record and final state.
pub fn run_shot(
    c: &Circuit,
    noise: &NoiseConfig,
    initial: &StateVector,
    point: u64,
    shot_index: u64,
) -> Result<(ShotRecord, StateVector)> {
    let key = ShotKey::new(noise.base_seed, point, shot_index);
    let mut det = Detunings::new(noise, key);
    let mut s = initial.clone();
    run_circuit(c, &mut s, &mut det)?;
    let rec = ShotRecord {
        shot_index,
        detunings: det.samples(),
        bits: Vec::new(),
        retained: true,
        indicator: None,
    };
    Ok((rec, s))
}

/// Averages `observable(final state)` over shots. Shot order does not matter:
/// values are collected by index and reduced sequentially.
pub fn run_ensemble<F>(
    c: &Circuit,
    noise: &NoiseConfig,
    initial: &StateVector,
    shots: usize,
    point: u64,
    observable: F,
) -> Result<Estimate>
where
    F: Fn(&StateVector) -> Result<f64> + Sync,
{
    if shots == 0 {
        return Err(invalid("shots must be at least 1"));
    }
    let values: Vec<Result<f64>> = (0..shots as u64)
        .into_par_iter()
        .map(|i| {
            let (_, s) = run_shot(c, noise, initial, point, i)?;
            observable(&s)
        })
        .collect();
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let est = Estimate::from_shots(values.into_iter().map(Some));
    if est.shots_retained == 0 {
        return Err(Error::NoRetainedShots);
    }
    Ok(est)
}

/// `π/2 — wait — π/2` on qubit `q` of an `n`-qubit register.
pub fn ramsey_circuit(n: usize, q: usize, wait_ns: f64, dev: &DeviceParams) -> Result<Circuit> {
    let mut c = Circuit::new(n, dev.clone())?;
    c.rx(q, PI / 2.0)?;
    c.push(GateOp::idle(q, wait_ns))?;
    c.rx(q, PI / 2.0)?;
    Ok(c)
}

/// Recovers T2* (µs) from Ramsey contrast `⟨cos φ⟩` measured at waits in ns.
///
/// Assumes a Gaussian envelope `exp(-((t + t0)/T2*)²)`; the unknown offset `t0`
/// absorbs precession during the pulses. Points with contrast below `floor`
/// are ignored.
pub fn fit_ramsey_t2(waits_ns: &[f64], contrast: &[f64], floor: f64) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = waits_ns
        .iter()
        .zip(contrast)
        .filter(|(_, &c)| c > floor && c < 1.0)
        .map(|(&t, &c)| (t * 1e-3, (-c.ln()).sqrt()))
        .unzip();
    if x.len() < 3 {
        return Err(invalid("not enough usable Ramsey points"));
    }
    let (_, slope) = crate::stats::linear_fit(&x, &y);
    if !(slope > 0.0) {
        return Err(invalid("Ramsey decay has no positive slope"));
    }
    Ok(1.0 / slope)
}

/// `J = J_ref · exp(vB / v_scale)`.
pub fn exchange_from_barrier(vb_mv: f64, j_ref_mhz: f64, v_scale_mv: f64) -> Result<f64> {
    if v_scale_mv == 0.0 {
        return Err(invalid("v_scale must be nonzero"));
    }
    Ok(j_ref_mhz * (vb_mv / v_scale_mv).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::rx;
    use crate::linalg::{expm_hermitian, CMatrix};
    use crate::C64;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn infinite_t2_gives_zero_detuning() {
        let mut rng = stream(&[1]);
        for _ in 0..10 {
            assert_eq!(sample_detuning(f64::INFINITY, &mut rng).unwrap(), 0.0);
        }
        assert!(sample_detuning(0.0, &mut rng).is_err());
    }

    #[test]
    fn detuning_spread_and_mean() {
        let mut rng = stream(&[7]);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_detuning(1.0, &mut rng).unwrap()).collect();
        let sigma = 1e6 / (2f64.sqrt() * PI);
        assert!((sigma - 225_079.0).abs() < 1.0);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = crate::stats::std_dev(&xs);
        assert!((sd / sigma - 1.0).abs() < 0.01);
        assert!(mean.abs() < 3.0 * sigma / 1e3);
    }

    #[test]
    fn idle_dephase_examples() {
        let mut s = StateVector::all_down(1).unwrap();
        s.apply_1q(&rx(FRAC_PI_2), 1).unwrap();
        let before = s.clone();
        idle_dephase(&mut s, 1, 100.0, 0.0).unwrap();
        assert_eq!(s, before);

        let mut d = StateVector::all_down(1).unwrap();
        idle_dephase(&mut d, 1, 123.0, 1e6).unwrap();
        assert!((d.amplitude(0).norm() - 1.0).abs() < 1e-15);

        // ⟨X⟩ from amplitudes: 2 Re(conj(a0) a1)
        let ex = |s: &StateVector| 2.0 * (s.amplitude(0).conj() * s.amplitude(1)).re;
        let mut p = StateVector::all_down(1).unwrap();
        p.apply_1q(&crate::gates::ry(FRAC_PI_2), 1).unwrap();
        let x0 = ex(&p);
        // θ_ε = π: f·t = 1/2
        idle_dephase(&mut p, 1, 500.0, 1e6).unwrap();
        assert!((ex(&p) + x0).abs() < 1e-12);
        assert!(x0.abs() > 0.99);
    }

    #[test]
    fn noisy_drive_examples() {
        let mut s = StateVector::all_down(1).unwrap();
        noisy_drive(&mut s, 1, PI, 0.0, 100.0).unwrap();
        assert!((s.amplitude(1).norm() - 1.0).abs() < 1e-15);

        let mut z = StateVector::all_down(1).unwrap();
        noisy_drive(&mut z, 1, 0.0, 3e6, 100.0).unwrap();
        assert_eq!(z, StateVector::all_down(1).unwrap());

        // θ = θ_ε = π via f·t_π = 1/2
        let mut s = StateVector::all_down(1).unwrap();
        noisy_drive(&mut s, 1, PI, 5e6, 100.0).unwrap();
        let h = CMatrix::from_row_slice(2, 2, &[
            C64::new(-PI, 0.0), C64::new(PI, 0.0),
            C64::new(PI, 0.0), C64::new(PI, 0.0),
        ]);
        let u = expm_hermitian(&h, 0.5);
        let want = u[(1, 0)].norm_sqr();
        let omega = 2f64.sqrt() * PI;
        let closed = (omega / 2.0).sin().powi(2) * PI * PI / (omega * omega);
        assert!((want - closed).abs() < 1e-12);
        assert!((s.prob_up(1).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn detunings_are_order_independent() {
        let noise = NoiseConfig::default().with_seed(9);
        let key = ShotKey::new(9, 3, 17);
        let mut a = Detunings::new(&noise, key);
        let mut b = Detunings::new(&noise, key);
        let a1 = a.get(1, Regime::Off);
        let a2 = a.get(2, Regime::Off);
        let b2 = b.get(2, Regime::Off);
        let b1 = b.get(1, Regime::Off);
        assert_eq!((a1, a2), (b1, b2));
        assert_eq!(a.get(1, Regime::Off), a1);
        let on = a.get(1, Regime::On { neighbor: 2, state: NeighborState::Down });
        assert_ne!(on, a1);
    }

    #[test]
    fn correlated_regimes_share_the_draw() {
        let mut noise = NoiseConfig::default().with_seed(2);
        noise.correlate_regimes = true;
        noise.t2 = T2Table { default_off_us: 3.0, default_on_us: 1.5, ..Default::default() };
        let mut d = Detunings::new(&noise, ShotKey::new(2, 0, 0));
        let off = d.get(1, Regime::Off);
        let on = d.get(1, Regime::On { neighbor: 2, state: NeighborState::Up });
        assert!((on / off - 2.0).abs() < 1e-12);
    }

    #[test]
    fn t2_lookup_falls_back() {
        let mut t = T2Table::default();
        t.on.insert((3, 4, NeighborState::Up), 1.0);
        t.on.insert((3, 4, NeighborState::Down), 2.0);
        assert_eq!(t.lookup(3, Regime::On { neighbor: 4, state: NeighborState::Up }), 1.0);
        assert_eq!(t.lookup(3, Regime::On { neighbor: 4, state: NeighborState::Avg }), 1.5);
        assert_eq!(t.lookup(3, Regime::On { neighbor: 2, state: NeighborState::Up }), DEFAULT_T2_ON_US);
        assert_eq!(t.lookup(5, Regime::Off), DEFAULT_T2_OFF_US);
    }

    #[test]
    fn disabled_noise_matches_ideal() {
        let dev = DeviceParams::default();
        let c = crate::circuit::build_quench(
            &crate::circuit::QuenchSpec::chain(4, crate::circuit::QuenchVariant::Simplified),
            0.9,
            &dev,
        )
        .unwrap();
        let init = StateVector::all_down(4).unwrap();
        let (_, noisy) = run_shot(&c, &NoiseConfig::disabled(), &init, 0, 0).unwrap();
        let mut ideal = init.clone();
        c.apply(&mut ideal).unwrap();
        assert_eq!(noisy, ideal);

        let inf = NoiseConfig { t2: T2Table::uniform(f64::INFINITY), ..Default::default() };
        let (_, s) = run_shot(&c, &inf, &init, 0, 0).unwrap();
        assert!((s.fidelity_with(&ideal).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shot_is_deterministic() {
        let c = ramsey_circuit(2, 1, 800.0, &DeviceParams::default()).unwrap();
        let noise = NoiseConfig::default().with_seed(42);
        let init = StateVector::all_down(2).unwrap();
        let a = run_shot(&c, &noise, &init, 5, 11).unwrap();
        let b = run_shot(&c, &noise, &init, 5, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_ensemble_has_zero_stderr() {
        let c = ramsey_circuit(1, 1, 300.0, &DeviceParams::default()).unwrap();
        let init = StateVector::all_down(1).unwrap();
        let e = run_ensemble(&c, &NoiseConfig::disabled(), &init, 50, 0, |s| s.prob_up(1)).unwrap();
        assert!((e.mean.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(e.stderr, Some(0.0));
    }

    #[test]
    fn exchange_law() {
        assert_eq!(exchange_from_barrier(0.0, 2.0, 5.0).unwrap(), 2.0);
        assert!((exchange_from_barrier(5.0, 2.0, 5.0).unwrap() - 2.0 * std::f64::consts::E).abs() < 1e-12);
        let v: Vec<f64> = (0..10).map(|i| -20.0 + 4.0 * i as f64).collect();
        let lj: Vec<f64> = v.iter().map(|&x| exchange_from_barrier(x, 1.3, 7.0).unwrap().ln()).collect();
        let (_, slope) = crate::stats::linear_fit(&v, &lj);
        assert!((slope - 1.0 / 7.0).abs() < 1e-12);
        assert!(exchange_from_barrier(1.0, 1.0, 0.0).is_err());
    }
}
