//! Sweep runners: Loschmidt echo, magnetization, Rabi, finite-size scan and the
//! periodicity study, plus the closed-form return probability.
//!
//! Every shot of every sweep point draws its randomness from counter-based
//! streams keyed by (seed, point, shot), and per-shot values are reduced in
//! index order, so results do not depend on thread count.

use std::f64::consts::PI;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{all_combos, all_combos_within, build_quench, combo_label, Circuit, DeviceParams, QuenchSpec, QuenchVariant};
use crate::error::{invalid, Error, Result};
use crate::measurement::{
    self, find_bit, initialize, label_dd_left, label_dd_right, label_qnd, raw_initial_state, readout_all,
    readout_direct, readout_magnetization, z_from_magnetization_record, Branch, InitSource, Kind, Label, Layout,
    ReadoutParams, Tracker,
};
use crate::noise::{run_circuit, Detunings, NoiseConfig, ShotKey};
use crate::rng::{mix, tag};
use crate::state::StateVector;
use crate::gates::C64;
use crate::linalg::{CMatrix, CVector};
use crate::stats::Estimate;
use crate::tomography::{analyze, ghz_state, DensityMatrix, TomoData, TomoReport};

/// `|cos(θ/2)^{N+1} + i^{N+1} sin(θ/2)^{N+1}|²`, evaluated without complex
/// arithmetic so that the zeros at `N ≡ 1 (mod 4)` come out exact.
pub fn analytical_loschmidt(n: usize, theta: f64) -> f64 {
    let m = n as i32 + 1;
    let cos = snapped_cos(theta);
    let c2 = 0.5 * (1.0 + cos);
    let s2 = 0.5 * (1.0 - cos);
    let v = if m % 2 == 1 {
        c2.powi(m) + s2.powi(m)
    } else if m % 4 == 0 {
        (c2.powi(m / 2) + s2.powi(m / 2)).powi(2)
    } else {
        (c2.powi(m / 2) - s2.powi(m / 2)).powi(2)
    };
    v.clamp(0.0, 1.0)
}

/// `cos θ` with odd multiples of π/2 mapped to exactly zero, so the closed
/// form vanishes exactly at the critical angle rather than at ~1e-33.
fn snapped_cos(theta: f64) -> f64 {
    let quarter = theta / (PI / 2.0);
    let k = quarter.round();
    if (quarter - k).abs() < 1e-12 && (k as i64).rem_euclid(2) == 1 {
        0.0
    } else {
        theta.cos()
    }
}

/// Values below this are reported as exact zeros by the finite-size scan.
pub const ZERO_FLOOR: f64 = 1e-20;

/// Rate function `λ = -ln(L)/N`; infinite at exact zeros.
pub fn rate_function(n: usize, l: f64) -> f64 {
    -l.ln() / n as f64
}

/// How a shot turns a final state into a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    /// Exact outcome probability for the shot's state (enumerated readout).
    Exact,
    /// One sampled readout bit per shot.
    Sampled,
}

/// Everything a runner needs besides the sweep itself.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub device: DeviceParams,
    pub noise: NoiseConfig,
    pub readout: ReadoutParams,
    pub layout: Layout,
    pub init: InitSource,
    pub shots: usize,
    pub estimator: Estimator,
}

impl Default for RunContext {
    fn default() -> Self {
        RunContext {
            device: DeviceParams::default(),
            noise: NoiseConfig::default(),
            readout: ReadoutParams::default(),
            layout: Layout::paper(),
            init: InitSource::PostSelectedSeed,
            shots: 2000,
            estimator: Estimator::Exact,
        }
    }
}

impl RunContext {
    pub fn ideal() -> Self {
        RunContext { noise: NoiseConfig::disabled(), shots: 1, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(invalid("shots must be at least 1"));
        }
        self.readout.validate()?;
        self.noise.validate(self.layout.qubits)
    }

    /// Enumerating readout branches with bit-flip errors grows exponentially,
    /// so flipped readout falls back to sampling.
    pub fn effective_estimator(&self) -> Estimator {
        if self.readout.readout_error > 0.0 {
            Estimator::Sampled
        } else {
            self.estimator
        }
    }

    /// Every shot is identical: no noise, deterministic initialization and
    /// exact estimation. Such points are evaluated once.
    fn deterministic(&self) -> bool {
        !self.noise.enabled
            && self.init == InitSource::PostSelectedSeed
            && self.readout.is_ideal()
            && self.effective_estimator() == Estimator::Exact
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub estimate: Estimate,
}

impl SweepPoint {
    /// A grid point with no retained shots.
    pub fn is_flagged(&self) -> bool {
        self.estimate.mean.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub experiment: String,
    pub n: usize,
    pub combo: String,
    pub observable: String,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn means(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.estimate.mean).collect()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.theta).collect()
    }

    /// Means with flagged points dropped.
    pub fn defined_means(&self) -> Vec<f64> {
        self.points.iter().filter_map(|p| p.estimate.mean).collect()
    }
}

/// Equal-weight average of curves sharing a θ grid.
pub fn average_curves(curves: &[SweepResult], label: &str) -> Result<SweepResult> {
    let first = curves.first().ok_or_else(|| invalid("nothing to average"))?;
    let mut points = Vec::with_capacity(first.points.len());
    for (i, p0) in first.points.iter().enumerate() {
        let mut sum = 0.0;
        let mut var = 0.0;
        let mut k = 0usize;
        let mut total = 0;
        let mut kept = 0;
        for c in curves {
            let p = c.points.get(i).ok_or_else(|| invalid("curves have different grids"))?;
            total += p.estimate.shots_total;
            kept += p.estimate.shots_retained;
            if let Some(m) = p.estimate.mean {
                sum += m;
                var += p.estimate.stderr.unwrap_or(0.0).powi(2);
                k += 1;
            }
        }
        let (mean, stderr) = if k == 0 { (None, None) } else { (Some(sum / k as f64), Some(var.sqrt() / k as f64)) };
        points.push(SweepPoint {
            theta: p0.theta,
            estimate: Estimate { mean, stderr, shots_total: total, shots_retained: kept },
        });
    }
    Ok(SweepResult {
        experiment: first.experiment.clone(),
        n: first.n,
        combo: label.to_string(),
        observable: first.observable.clone(),
        points,
    })
}

/// `steps` evenly spaced angles from `start` to `stop` inclusive.
pub fn theta_grid(start: f64, stop: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(invalid("a θ range needs at least 2 steps"));
    }
    let h = (stop - start) / (steps - 1) as f64;
    Ok((0..steps).map(|i| if i == steps - 1 { stop } else { start + h * i as f64 }).collect())
}

/// Result of one shot: `None` when post-selection discarded it, otherwise one
/// value per requested observable.
type ShotValues = Option<Vec<f64>>;

/// Prepares the register for one shot. Returns `None` if initialization fails.
fn prepare(ctx: &RunContext, key: ShotKey) -> Result<Option<StateVector>> {
    if !ctx.layout.uses_psb() {
        return StateVector::all_down(ctx.layout.qubits).map(Some);
    }
    let raw = raw_initial_state(ctx.init, &mut key.stream(tag::INIT))?;
    let mut t = Tracker::sample(raw, key.stream(tag::INIT ^ 1));
    initialize(&mut t, &ctx.readout)?;
    Ok(t.single().map(|b| b.state.clone()))
}

/// Runs readout on `state` and evaluates `observables` on the outcome record(s).
fn read<F>(ctx: &RunContext, key: ShotKey, state: StateVector, sequence: F, observables: &[Observable]) -> Result<Vec<f64>>
where
    F: Fn(&mut Tracker) -> Result<()>,
{
    let mut t = match ctx.effective_estimator() {
        Estimator::Exact => Tracker::enumerate(state),
        Estimator::Sampled => Tracker::sample(state, key.stream(tag::MEASURE)),
    };
    sequence(&mut t)?;
    observables
        .iter()
        .map(|o| t.expectation(|b| o.eval(b)).ok_or(Error::ZeroProbability))
        .collect()
}

/// A number extracted from a readout record.
#[derive(Debug, Clone)]
pub enum Observable {
    Bit(Label),
    /// AND of several bits.
    All(Vec<Label>),
    /// Mean `Z` of the listed qubits from a magnetization record.
    Magnetization(Vec<usize>),
}

impl Observable {
    fn eval(&self, b: &Branch) -> f64 {
        match self {
            Observable::Bit(l) => f64::from(b.bit(*l).unwrap_or(0)),
            Observable::All(ls) => f64::from(ls.iter().all(|l| b.bit(*l) == Some(1)) as u8),
            Observable::Magnetization(qs) => {
                let zs: f64 = qs.iter().map(|&q| z_from_magnetization_record(&b.records, q).unwrap_or(0.0)).sum();
                zs / qs.len() as f64
            }
        }
    }
}

/// Shared driver: prepare, run `circuit` under noise, read out, reduce.
fn run_point<F>(
    ctx: &RunContext,
    circuit: &Circuit,
    point: u64,
    sequence: F,
    observables: &[Observable],
) -> Result<Vec<Estimate>>
where
    F: Fn(&mut Tracker) -> Result<()> + Sync,
{
    let shot = |i: u64| -> Result<ShotValues> {
        let key = ShotKey::new(ctx.noise.base_seed, point, i);
        let Some(mut s) = prepare(ctx, key)? else {
            return Ok(None);
        };
        let mut det = Detunings::new(&ctx.noise, key);
        run_circuit(circuit, &mut s, &mut det)?;
        read(ctx, key, s, &sequence, observables).map(Some)
    };
    let per_shot: Vec<ShotValues> = if ctx.deterministic() {
        let v = shot(0)?;
        vec![v; ctx.shots]
    } else {
        let vals: Vec<Result<ShotValues>> = (0..ctx.shots as u64).into_par_iter().map(shot).collect();
        vals.into_iter().collect::<Result<_>>()?
    };
    Ok((0..observables.len())
        .map(|k| Estimate::from_shots(per_shot.iter().map(|v| v.as_ref().map(|xs| xs[k]))))
        .collect())
}

fn point_id(parts: &[u64]) -> u64 {
    mix(parts)
}

const EXP_LOSCHMIDT: u64 = 1;
const EXP_MAGNETIZATION: u64 = 2;
const EXP_RABI: u64 = 3;
const EXP_TOMO: u64 = 4;

/// Indicator that every qubit of the register reads down.
fn all_down_observable(layout: &Layout) -> Observable {
    if layout.uses_psb() {
        Observable::All(vec![label_dd_left(), label_qnd(3), label_qnd(4), label_dd_right()])
    } else {
        Observable::All((1..=layout.qubits).map(|q| Label::qubit(Kind::Z, q)).collect())
    }
}

fn full_readout(layout: Layout, params: ReadoutParams) -> impl Fn(&mut Tracker) -> Result<()> + Sync {
    move |t: &mut Tracker| {
        if layout.uses_psb() {
            readout_all(t, &params)
        } else {
            let qs: Vec<usize> = (1..=layout.qubits).collect();
            readout_direct(t, &qs, &params)
        }
    }
}

/// Which combos a runner covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Combos {
    All,
    List(Vec<Vec<usize>>),
}

/// Loschmidt sweep output: one curve per combo plus their average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoschmidtRun {
    pub per_combo: Vec<SweepResult>,
    pub average: SweepResult,
}

impl LoschmidtRun {
    /// Largest deviation of the average curve from the closed form.
    pub fn max_oracle_deviation(&self) -> f64 {
        self.average
            .points
            .iter()
            .filter_map(|p| p.estimate.mean.map(|m| (m - analytical_loschmidt(self.average.n, p.theta)).abs()))
            .fold(0.0, f64::max)
    }
}

fn check_fits(n: usize, layout: &Layout) -> Result<()> {
    if n == 0 || n > layout.qubits {
        return Err(invalid(format!(
            "N = {n} does not fit the {}-qubit layout; configure a larger `layout.qubits`",
            layout.qubits
        )));
    }
    Ok(())
}

/// Initialize, simplified quench, full readout; records the all-down indicator.
pub fn run_loschmidt(ctx: &RunContext, n: usize, combos: &Combos, thetas: &[f64]) -> Result<LoschmidtRun> {
    ctx.validate()?;
    check_fits(n, &ctx.layout)?;
    let combos = match combos {
        Combos::All => all_combos(n, ctx.layout.qubits),
        Combos::List(l) => l.clone(),
    };
    let obs = [all_down_observable(&ctx.layout)];
    let seq = full_readout(ctx.layout, ctx.readout);
    let mut per_combo = Vec::with_capacity(combos.len());
    for (ci, combo) in combos.iter().enumerate() {
        let spec = QuenchSpec { n, variant: QuenchVariant::Simplified, combo: combo.clone(), register: ctx.layout.qubits };
        spec.validate()?;
        let mut points = Vec::with_capacity(thetas.len());
        for (ti, &theta) in thetas.iter().enumerate() {
            let c = build_quench(&spec, theta, &ctx.device)?;
            let id = point_id(&[EXP_LOSCHMIDT, n as u64, ci as u64, ti as u64]);
            let est = run_point(ctx, &c, id, &seq, &obs)?;
            points.push(SweepPoint { theta, estimate: est[0] });
        }
        debug!("loschmidt N={n} combo {} done", combo_label(combo));
        per_combo.push(SweepResult {
            experiment: "loschmidt".into(),
            n,
            combo: combo_label(combo),
            observable: "return_probability".into(),
            points,
        });
    }
    let average = average_curves(&per_combo, "avg")?;
    Ok(LoschmidtRun { per_combo, average })
}

/// Magnetization `M_z = (1/N) Σ Z_i` for chains inside qubits 2-5.
pub fn run_magnetization(ctx: &RunContext, n: usize, combos: &Combos, thetas: &[f64]) -> Result<LoschmidtRun> {
    ctx.validate()?;
    if !ctx.layout.uses_psb() {
        return Err(invalid("magnetization readout needs the six-qubit spin-blockade layout"));
    }
    if !(3..=4).contains(&n) {
        return Err(invalid(format!("magnetization runs support N = 3 or 4, got {n}")));
    }
    let combos = match combos {
        Combos::All => all_combos_within(n, 2, 5),
        Combos::List(l) => {
            if let Some(bad) = l.iter().find(|c| c.iter().any(|&q| q == 1 || q == 6)) {
                return Err(invalid(format!("combo {} touches an outer qubit", combo_label(bad))));
            }
            l.clone()
        }
    };
    let params = ctx.readout;
    let seq = move |t: &mut Tracker| readout_magnetization(t, &params);
    let mut per_combo = Vec::with_capacity(combos.len());
    for (ci, combo) in combos.iter().enumerate() {
        let spec = QuenchSpec { n, variant: QuenchVariant::Simplified, combo: combo.clone(), register: 6 };
        spec.validate()?;
        let obs = [Observable::Magnetization(combo.clone())];
        let mut points = Vec::with_capacity(thetas.len());
        for (ti, &theta) in thetas.iter().enumerate() {
            let c = build_quench(&spec, theta, &ctx.device)?;
            let id = point_id(&[EXP_MAGNETIZATION, n as u64, ci as u64, ti as u64]);
            let est = run_point(ctx, &c, id, seq, &obs)?;
            points.push(SweepPoint { theta, estimate: est[0] });
        }
        per_combo.push(SweepResult {
            experiment: "magnetization".into(),
            n,
            combo: combo_label(combo),
            observable: "m_z".into(),
            points,
        });
    }
    let average = average_curves(&per_combo, "avg")?;
    Ok(LoschmidtRun { per_combo, average })
}

/// Observables reported by a Rabi run, with their record labels.
pub fn rabi_observables() -> Vec<(&'static str, Observable)> {
    use Kind::{C, D};
    vec![
        ("M_C(1,2)", Observable::Bit(Label::pair(C, 1, 2))),
        ("M_D(1,2)", Observable::Bit(Label::pair(D, 1, 2))),
        ("M_dd(1,2)", Observable::Bit(label_dd_left())),
        ("QND(3)", Observable::Bit(label_qnd(3))),
        ("QND(4)", Observable::Bit(label_qnd(4))),
        ("M_C(5,6)", Observable::Bit(Label::pair(C, 5, 6))),
        ("M_D(5,6)", Observable::Bit(Label::pair(D, 5, 6))),
        ("M_dd(5,6)", Observable::Bit(label_dd_right())),
        ("down3", Observable::All(vec![label_dd_left(), label_qnd(3)])),
        ("down6", all_down_observable(&Layout::paper())),
    ]
}

/// Drives qubit `q` by `θ` between initialization and full readout.
pub fn run_rabi(ctx: &RunContext, q: usize, thetas: &[f64]) -> Result<Vec<SweepResult>> {
    ctx.validate()?;
    if !ctx.layout.uses_psb() {
        return Err(invalid("Rabi runs need the six-qubit spin-blockade layout"));
    }
    crate::state::check_label(q, 6)?;
    let named = rabi_observables();
    let obs: Vec<Observable> = named.iter().map(|(_, o)| o.clone()).collect();
    let seq = full_readout(ctx.layout, ctx.readout);
    let mut columns: Vec<Vec<SweepPoint>> = vec![Vec::with_capacity(thetas.len()); obs.len()];
    for (ti, &theta) in thetas.iter().enumerate() {
        let mut c = Circuit::new(6, ctx.device.clone())?;
        c.rx(q, theta)?;
        let id = point_id(&[EXP_RABI, q as u64, ti as u64]);
        let est = run_point(ctx, &c, id, &seq, &obs)?;
        for (k, e) in est.into_iter().enumerate() {
            columns[k].push(SweepPoint { theta, estimate: e });
        }
    }
    Ok(named
        .into_iter()
        .zip(columns)
        .map(|((name, _), points)| SweepResult {
            experiment: "rabi".into(),
            n: 1,
            combo: format!("q{q}"),
            observable: name.into(),
            points,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanMode {
    Circuit,
    Analytical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteSizeRow {
    pub n: usize,
    pub value: f64,
    /// `None` at exact zeros.
    pub log10: Option<f64>,
    pub rate: f64,
    pub mode: ScanMode,
}

/// Noiseless return probability of the simplified chain circuit on `|↓⟩^N`.
pub fn circuit_loschmidt(n: usize, theta: f64, dev: &DeviceParams) -> Result<f64> {
    let c = build_quench(&QuenchSpec::chain(n, QuenchVariant::Simplified), theta, dev)?;
    let mut s = StateVector::all_down(n)?;
    c.apply(&mut s)?;
    Ok(s.amplitude(0).norm_sqr())
}

/// `L(θ)` against `N`; circuit evaluation up to the simulator's register limit,
/// closed form beyond.
pub fn finite_size_scan(ns: impl IntoIterator<Item = usize>, theta: f64) -> Result<Vec<FiniteSizeRow>> {
    let dev = DeviceParams::default();
    ns.into_iter()
        .map(|n| {
            let (value, mode) = if n <= crate::state::MAX_QUBITS {
                let v = circuit_loschmidt(n, theta, &dev)?;
                (if v < ZERO_FLOOR { 0.0 } else { v }, ScanMode::Circuit)
            } else {
                (analytical_loschmidt(n, theta), ScanMode::Analytical)
            };
            Ok(FiniteSizeRow {
                n,
                value,
                log10: (value > 0.0).then(|| value.log10()),
                rate: rate_function(n, value),
                mode,
            })
        })
        .collect()
}

/// Where the return probability is sampled in the periodicity study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    /// After the boundary rotations.
    PreEntangler,
    /// After the CNOT staircase (or where it would be).
    PostEntangler,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityResult {
    pub n: usize,
    pub with_entanglers: bool,
    pub step: f64,
    pub stages: Vec<(Stage, f64)>,
}

/// Stage-resolved return probabilities over the grid.
pub fn periodicity_traces(n: usize, thetas: &[f64], with_entanglers: bool) -> Result<Vec<(Stage, Vec<f64>)>> {
    if !(2..=crate::state::MAX_QUBITS).contains(&n) {
        return Err(Error::QubitCount(n));
    }
    let mut pre = Vec::with_capacity(thetas.len());
    let mut post = Vec::with_capacity(thetas.len());
    let mut fin = Vec::with_capacity(thetas.len());
    let x = |theta| crate::gates::rx(theta);
    for &theta in thetas {
        let mut s = StateVector::all_down(n)?;
        s.apply_1q(&x(theta), 1)?;
        s.apply_1q(&x(theta), n)?;
        pre.push(s.amplitude(0).norm_sqr());
        if with_entanglers {
            for i in 1..n {
                s.apply_cnot(i, i + 1)?;
            }
        }
        post.push(s.amplitude(0).norm_sqr());
        for i in 1..n {
            s.apply_1q(&x(theta), i)?;
        }
        fin.push(s.amplitude(0).norm_sqr());
    }
    Ok(vec![(Stage::PreEntangler, pre), (Stage::PostEntangler, post), (Stage::Final, fin)])
}

/// Period estimate for each stage on a uniform grid with spacing `step`.
pub fn periodicity_study(n: usize, thetas: &[f64], with_entanglers: bool) -> Result<PeriodicityResult> {
    if thetas.len() < 4 {
        return Err(invalid("periodicity study needs at least 4 grid points"));
    }
    let step = thetas[1] - thetas[0];
    let stages = periodicity_traces(n, thetas, with_entanglers)?
        .into_iter()
        .map(|(stage, ys)| Ok((stage, estimate_period(&ys, step)?)))
        .collect::<Result<_>>()?;
    Ok(PeriodicityResult { n, with_entanglers, step, stages })
}

/// Default grid for the periodicity study: `[0, 4π]` in steps of π/40.
pub fn periodicity_grid() -> Vec<f64> {
    (0..=160).map(|i| i as f64 * PI / 40.0).collect()
}

/// Lag of the strongest local maximum of the lagged correlation, searched up to
/// 60% of the series length. Near-ties go to the shorter lag.
///
/// Each lag uses the Pearson correlation of the overlapping windows, so a
/// perfectly periodic series scores exactly 1 at its period.
pub fn estimate_period(ys: &[f64], step: f64) -> Result<f64> {
    let m = ys.len();
    let max_lag = (m as f64 * 0.6) as usize;
    let r: Vec<f64> = (0..=max_lag + 1).map(|k| lagged_correlation(ys, k)).collect();
    let mut best: Option<(usize, f64)> = None;
    for k in 1..=max_lag {
        if r[k] >= r[k - 1] && r[k] >= r[k + 1] {
            match best {
                Some((_, v)) if r[k] <= v + 1e-9 => {}
                _ => best = Some((k, r[k])),
            }
        }
    }
    best.map(|(k, _)| k as f64 * step).ok_or_else(|| invalid("no autocorrelation peak found"))
}

fn lagged_correlation(ys: &[f64], k: usize) -> f64 {
    if k + 2 > ys.len() {
        return f64::NEG_INFINITY;
    }
    let a = &ys[..ys.len() - k];
    let b = &ys[k..];
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa < 1e-24 || sbb < 1e-24 {
        return if saa < 1e-24 && sbb < 1e-24 { 1.0 } else { 0.0 };
    }
    sab / (saa * sbb).sqrt()
}

/// State handed to tomography.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TomoPrep {
    /// Full quench circuit on an `n`-qubit chain at angle `theta`.
    Quench { n: usize, theta: f64 },
    Ghz { n: usize, phi: f64 },
    Bell,
}

/// Ideal target state and the prepared density matrix. With noise enabled the
/// quench state is averaged over `ctx.shots` quasi-static noise realizations.
pub fn tomography_state(ctx: &RunContext, prep: TomoPrep) -> Result<(StateVector, DensityMatrix)> {
    match prep {
        TomoPrep::Quench { n, theta } => {
            let c = build_quench(&QuenchSpec::chain(n, QuenchVariant::Full), theta, &ctx.device)?;
            let mut ideal = StateVector::all_down(n)?;
            c.apply(&mut ideal)?;
            if !ctx.noise.enabled {
                return Ok((ideal.clone(), DensityMatrix::from_pure(&ideal)?));
            }
            let d = 1usize << n;
            let point = point_id(&[EXP_TOMO, n as u64, theta.to_bits()]);
            let states: Vec<Result<StateVector>> = (0..ctx.shots as u64)
                .into_par_iter()
                .map(|i| {
                    let key = ShotKey::new(ctx.noise.base_seed, point, i);
                    let mut s = StateVector::all_down(n)?;
                    run_circuit(&c, &mut s, &mut Detunings::new(&ctx.noise, key))?;
                    Ok(s)
                })
                .collect();
            let mut m = CMatrix::zeros(d, d);
            for s in states {
                let v = CVector::from_column_slice(s?.amplitudes());
                m += &v * v.adjoint();
            }
            m /= C64::new(ctx.shots as f64, 0.0);
            let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            Ok((ideal, DensityMatrix::new(m)?))
        }
        TomoPrep::Ghz { n, phi } => {
            let g = ghz_state(n, phi)?;
            Ok((g.clone(), DensityMatrix::from_pure(&g)?))
        }
        TomoPrep::Bell => {
            let g = ghz_state(2, 0.0)?;
            Ok((g.clone(), DensityMatrix::from_pure(&g)?))
        }
    }
}

/// Prepare, sample `shots` per setting (exact data when `None`), reconstruct and report.
pub fn run_tomography(
    ctx: &RunContext,
    prep: TomoPrep,
    shots: Option<u64>,
    bootstrap: usize,
) -> Result<TomoReport> {
    let (target, rho) = tomography_state(ctx, prep)?;
    let data = match shots {
        Some(k) => TomoData::sampled(&rho, k, mix(&[ctx.noise.base_seed, tag::TOMO]))?,
        None => TomoData::exact(&rho)?,
    };
    analyze(&data, &target, bootstrap, ctx.noise.base_seed)
}

/// Exact Born-rule helper used by checks: the all-down indicator for a state.
pub fn all_down_probability(s: &StateVector) -> f64 {
    s.amplitude(0).norm_sqr()
}

/// Exact readout distribution of the six-qubit pipeline for a fixed state.
pub fn readout_distribution(s: &StateVector, params: &ReadoutParams) -> Result<Vec<([u8; 4], f64)>> {
    let mut t = Tracker::enumerate(s.clone());
    readout_all(&mut t, params)?;
    let mut out: Vec<([u8; 4], f64)> = Vec::new();
    for b in t.branches() {
        let bits = measurement::ReadoutRecord::from_records(&b.records).bits();
        match out.iter_mut().find(|(k, _)| *k == bits) {
            Some((_, w)) => *w += b.weight,
            None => out.push((bits, b.weight)),
        }
    }
    out.sort_by_key(|a| a.0);
    Ok(out)
}

/// Bit recorded under `label` in a sampled readout of `s`.
pub fn sampled_bit(s: &StateVector, params: &ReadoutParams, label: Label, key: ShotKey) -> Result<u8> {
    let mut t = Tracker::sample(s.clone(), key.stream(tag::MEASURE));
    readout_all(&mut t, params)?;
    let b = t.single().ok_or(Error::ZeroProbability)?;
    Ok(find_bit(&b.records, label).unwrap_or(0))
}
