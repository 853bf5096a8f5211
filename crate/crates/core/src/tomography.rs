//! State tomography on up to four qubits: Pauli-basis settings, simulated
//! counts, maximum-likelihood reconstruction and the usual figures of merit.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gates::{identity, pauli_x, pauli_y, pauli_z, rx, ry, Gate2, C64};
use crate::linalg::{is_hermitian, tensor, trace, CMatrix};
use crate::rng::{stream, tag};
use crate::state::StateVector;

pub const MAX_TOMO_QUBITS: usize = 4;
pub const DEFAULT_BOOTSTRAP: usize = 300;
const PHYS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    m: CMatrix,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity within 1e-9.
    pub fn new(m: CMatrix) -> Result<Self> {
        let d = m.nrows();
        if d != m.ncols() || !d.is_power_of_two() || d < 2 {
            return Err(Error::DimensionMismatch(d, m.ncols()));
        }
        let n = d.trailing_zeros() as usize;
        if n > MAX_TOMO_QUBITS {
            return Err(Error::QubitCount(n));
        }
        if !is_hermitian(&m, PHYS_TOL) {
            return Err(invalid("density matrix is not Hermitian"));
        }
        if (trace(&m).re - 1.0).abs() > PHYS_TOL {
            return Err(invalid(format!("density matrix has trace {}", trace(&m).re)));
        }
        let min = m.clone().symmetric_eigen().eigenvalues.min();
        if min < -PHYS_TOL {
            return Err(invalid(format!("density matrix has eigenvalue {min}")));
        }
        Ok(DensityMatrix { n, m })
    }

    pub fn from_pure(s: &StateVector) -> Result<Self> {
        let v = DVector::from_column_slice(s.amplitudes());
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        let d = 1usize << n;
        Self::new(CMatrix::identity(d, d).map(|x| x / d as f64))
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn expectation(&self, p: &PauliString) -> f64 {
        trace(&(&self.m * p.matrix())).re
    }

    pub fn purity(&self) -> f64 {
        trace(&(&self.m * &self.m)).re
    }

    /// Row-major real and imaginary parts.
    pub fn parts(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let d = self.m.nrows();
        let re = (0..d).map(|r| (0..d).map(|c| self.m[(r, c)].re).collect()).collect();
        let im = (0..d).map(|r| (0..d).map(|c| self.m[(r, c)].im).collect()).collect();
        (re, im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn gate(self) -> Gate2 {
        match self {
            Pauli::I => identity(),
            Pauli::X => pauli_x(),
            Pauli::Y => pauli_y(),
            Pauli::Z => pauli_z(),
        }
    }
}

/// Tensor product of Paulis; `ops[0]` acts on qubit 1 and is printed first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    pub fn matrix(&self) -> CMatrix {
        tensor(&self.0.iter().map(|p| p.gate()).collect::<Vec<_>>())
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{p:?}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                _ => Err(invalid(format!("bad Pauli label `{c}` in `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

/// One measurement setting: a basis per qubit, realised by a pre-rotation
/// followed by `Z` readout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TomoSetting {
    pub bases: Vec<Pauli>,
}

impl TomoSetting {
    /// Rotation `R` with `R† Z R = P` for basis `P`.
    pub fn pre_rotation(basis: Pauli) -> Gate2 {
        match basis {
            Pauli::X => ry(-std::f64::consts::FRAC_PI_2),
            Pauli::Y => rx(std::f64::consts::FRAC_PI_2),
            _ => identity(),
        }
    }

    /// Name of the pre-pulse per qubit.
    pub fn pulse_names(&self) -> Vec<&'static str> {
        self.bases
            .iter()
            .map(|b| match b {
                Pauli::X => "Y(-pi/2)",
                Pauli::Y => "X(pi/2)",
                _ => "I",
            })
            .collect()
    }

    /// Which native measurement furnishes each qubit's `Z` result on the
    /// six-qubit device: outer qubits come from pair parity mapped to single-qubit
    /// `Z`, inner ones from QND readout.
    pub fn native_readout(&self, qubits: &[usize]) -> Vec<String> {
        qubits
            .iter()
            .map(|&q| match q {
                1 | 6 => format!("Z{q} via pair parity"),
                _ => format!("Z{q} via QND"),
            })
            .collect()
    }

    /// The `2^n − 1` non-trivial Pauli strings this setting estimates.
    pub fn strings(&self) -> Vec<PauliString> {
        let n = self.bases.len();
        (1..1usize << n)
            .map(|mask| {
                PauliString((0..n).map(|k| if mask >> k & 1 == 1 { self.bases[k] } else { Pauli::I }).collect())
            })
            .collect()
    }

    fn rotation(&self) -> CMatrix {
        tensor(&self.bases.iter().map(|&b| Self::pre_rotation(b)).collect::<Vec<_>>())
    }
}

/// All `3^n` per-qubit basis choices.
pub fn tomo_settings(n: usize) -> Result<Vec<TomoSetting>> {
    if n == 0 || n > MAX_TOMO_QUBITS {
        return Err(Error::QubitCount(n));
    }
    let choices = [Pauli::X, Pauli::Y, Pauli::Z];
    Ok((0..3usize.pow(n as u32))
        .map(|mut i| {
            let bases = (0..n)
                .map(|_| {
                    let b = choices[i % 3];
                    i /= 3;
                    b
                })
                .collect();
            TomoSetting { bases }
        })
        .collect())
}

/// `±1` eigenvalue of qubit `k` (0-based) in outcome `b`; `↑` is `+1`.
fn z_sign(b: usize, k: usize) -> f64 {
    if b >> k & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Outcome probabilities of a setting, indexed like basis states.
pub fn outcome_probabilities(rho: &DensityMatrix, setting: &TomoSetting) -> Vec<f64> {
    let r = setting.rotation();
    let rotated = &r * rho.matrix() * r.adjoint();
    (0..rotated.nrows()).map(|i| rotated[(i, i)].re.max(0.0)).collect()
}

/// Tomography data: per setting, observed outcome frequencies and a shot count.
/// `shots = None` marks exact (infinite-shot) data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomoData {
    pub n: usize,
    pub settings: Vec<TomoSetting>,
    pub freqs: Vec<Vec<f64>>,
    pub shots: Option<Vec<u64>>,
}

impl TomoData {
    pub fn exact(rho: &DensityMatrix) -> Result<Self> {
        let settings = tomo_settings(rho.n_qubits())?;
        let freqs = settings.iter().map(|s| outcome_probabilities(rho, s)).collect();
        Ok(TomoData { n: rho.n_qubits(), settings, freqs, shots: None })
    }

    /// Multinomial sampling of `shots` outcomes per setting.
    pub fn sampled(rho: &DensityMatrix, shots: u64, seed: u64) -> Result<Self> {
        if shots == 0 {
            return Err(invalid("shots per setting must be at least 1"));
        }
        let settings = tomo_settings(rho.n_qubits())?;
        let freqs = settings
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let p = outcome_probabilities(rho, s);
                let mut rng = stream(&[seed, tag::TOMO, i as u64]);
                let counts = draw_counts(&p, shots, &mut rng)?;
                Ok(counts.iter().map(|&c| c as f64 / shots as f64).collect())
            })
            .collect::<Result<_>>()?;
        Ok(TomoData { n: rho.n_qubits(), settings, freqs, shots: Some(vec![shots; 3usize.pow(rho.n_qubits() as u32)]) })
    }

    /// Builds raw counts `(setting index, outcome, count)` into data.
    pub fn from_counts(n: usize, counts: &[(usize, usize, u64)]) -> Result<Self> {
        let settings = tomo_settings(n)?;
        let d = 1usize << n;
        let mut raw = vec![vec![0u64; d]; settings.len()];
        for &(s, b, c) in counts {
            if s >= settings.len() || b >= d {
                return Err(invalid(format!("count entry ({s}, {b}) out of range")));
            }
            raw[s][b] += c;
        }
        let shots: Vec<u64> = raw.iter().map(|r| r.iter().sum()).collect();
        if shots.contains(&0) {
            return Err(invalid("every setting needs at least one count"));
        }
        let freqs = raw.iter().zip(&shots).map(|(r, &t)| r.iter().map(|&c| c as f64 / t as f64).collect()).collect();
        Ok(TomoData { n, settings, freqs, shots: Some(shots) })
    }

    /// Outcome distributions implied by a set of Pauli expectations (missing
    /// strings read as 0).
    pub fn from_expectations(n: usize, exps: &BTreeMap<PauliString, f64>) -> Result<Self> {
        let settings = tomo_settings(n)?;
        let d = 1usize << n;
        let freqs = settings
            .iter()
            .map(|s| {
                let strings = s.strings();
                (0..d)
                    .map(|b| {
                        let mut p = 1.0;
                        for (mask, ps) in (1..d).zip(&strings) {
                            let sign: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| z_sign(b, k)).product();
                            p += sign * exps.get(ps).copied().unwrap_or(0.0);
                        }
                        (p / d as f64).max(0.0)
                    })
                    .collect()
            })
            .collect();
        Ok(TomoData { n, settings, freqs, shots: None })
    }

    /// Mean of each non-trivial Pauli string over the settings that measure it.
    pub fn expectations(&self) -> BTreeMap<PauliString, f64> {
        let mut acc: BTreeMap<PauliString, (f64, usize)> = BTreeMap::new();
        for (s, f) in self.settings.iter().zip(&self.freqs) {
            for (mask, ps) in (1..1usize << self.n).zip(s.strings()) {
                let v: f64 = f
                    .iter()
                    .enumerate()
                    .map(|(b, p)| p * (0..self.n).filter(|k| mask >> k & 1 == 1).map(|k| z_sign(b, k)).product::<f64>())
                    .sum();
                let e = acc.entry(ps).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect()
    }

    /// Multinomial resample of the frequencies (exact data is returned unchanged).
    pub fn resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self> {
        let Some(shots) = &self.shots else {
            return Ok(self.clone());
        };
        let freqs = self
            .freqs
            .iter()
            .zip(shots)
            .map(|(f, &t)| Ok(draw_counts(f, t, rng)?.iter().map(|&c| c as f64 / t as f64).collect()))
            .collect::<Result<_>>()?;
        Ok(TomoData { freqs, ..self.clone() })
    }
}

fn draw_counts<R: Rng + ?Sized>(p: &[f64], shots: u64, rng: &mut R) -> Result<Vec<u64>> {
    let dist = WeightedIndex::new(p).map_err(|e| invalid(format!("bad outcome distribution: {e}")))?;
    let mut counts = vec![0u64; p.len()];
    for _ in 0..shots {
        counts[dist.sample(rng)] += 1;
    }
    Ok(counts)
}

/// Exact `Tr(ρP)` for every non-trivial Pauli string, or sampled estimates when
/// `shots` is given.
pub fn estimate_expectations(rho: &DensityMatrix, shots: Option<u64>, seed: u64) -> Result<BTreeMap<PauliString, f64>> {
    let data = match shots {
        None => TomoData::exact(rho)?,
        Some(s) => TomoData::sampled(rho, s, seed)?,
    };
    Ok(data.expectations())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub rho: DensityMatrix,
    pub converged: bool,
    pub iterations: usize,
    /// Final `Σ f·ln(f/p)` summed over settings, weighted by shots when known.
    pub objective: f64,
}

const MLE_TOL: f64 = 1e-10;
const MLE_MAX_ITER: usize = 5000;

struct Objective<'a> {
    data: &'a TomoData,
    projectors: Vec<Vec<CMatrix>>,
    weights: Vec<f64>,
    d: usize,
}

impl<'a> Objective<'a> {
    fn new(data: &'a TomoData) -> Self {
        let d = 1usize << data.n;
        let projectors = data
            .settings
            .iter()
            .map(|s| {
                let r = s.rotation();
                (0..d).map(|b| r.row(b).adjoint() * r.row(b)).collect()
            })
            .collect();
        let total: f64 = data.shots.as_ref().map_or(1.0, |s| s.iter().sum::<u64>() as f64 / s.len() as f64);
        let weights = match &data.shots {
            Some(s) => s.iter().map(|&t| t as f64 / total).collect(),
            None => vec![1.0; data.settings.len()],
        };
        Objective { data, projectors, weights, d }
    }

    fn unpack(&self, x: &[f64]) -> CMatrix {
        let d = self.d;
        CMatrix::from_fn(d, d, |r, c| C64::new(x[2 * (r * d + c)], x[2 * (r * d + c) + 1]))
    }

    fn rho_of(&self, t: &CMatrix) -> CMatrix {
        let a = t.adjoint() * t;
        let tr = trace(&a).re;
        a / C64::new(tr, 0.0)
    }

    /// Objective and gradient with respect to the real/imaginary parts of `T`.
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let t = self.unpack(x);
        let a = t.adjoint() * &t;
        let tr = trace(&a).re;
        let rho = &a / C64::new(tr, 0.0);
        let mut f = 0.0;
        let mut g = CMatrix::zeros(self.d, self.d);
        for ((projs, freqs), w) in self.projectors.iter().zip(&self.data.freqs).zip(&self.weights) {
            for (proj, &fr) in projs.iter().zip(freqs) {
                if fr <= 0.0 {
                    continue;
                }
                let p = trace(&(proj * &rho)).re.max(1e-300);
                f += w * fr * (fr / p).ln();
                g -= proj * C64::new(w * fr / p, 0.0);
            }
        }
        let gr = trace(&(&g * &rho)).re;
        let ga = (g - CMatrix::identity(self.d, self.d) * C64::new(gr, 0.0)) / C64::new(tr, 0.0);
        // d f = Tr(G_A (dT† T + T† dT)) = 2 Re Tr(G_A T† dT).
        let grad_t = (&t * &ga) * C64::new(2.0, 0.0);
        let mut out = vec![0.0; x.len()];
        for r in 0..self.d {
            for c in 0..self.d {
                out[2 * (r * self.d + c)] = grad_t[(r, c)].re;
                out[2 * (r * self.d + c) + 1] = grad_t[(r, c)].im;
            }
        }
        (f, out)
    }
}

/// Hermitian square root of a PSD matrix with eigenvalues clipped at zero.
fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let eig = m.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| C64::new(v.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * CMatrix::from_diagonal(&vals) * eig.eigenvectors.adjoint()
}

/// Linear-inversion estimate, projected to a physical state and mixed with a
/// little white noise so every outcome starts with positive probability.
fn starting_point(data: &TomoData) -> CMatrix {
    let d = 1usize << data.n;
    let mut m = CMatrix::identity(d, d);
    for (ps, v) in data.expectations() {
        m += ps.matrix() * C64::new(v, 0.0);
    }
    m /= C64::new(d as f64, 0.0);
    let eig = m.symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| C64::new(v.max(0.0), 0.0));
    let mut p = &eig.eigenvectors * CMatrix::from_diagonal(&vals) * eig.eigenvectors.adjoint();
    let tr = trace(&p).re;
    p = if tr > 0.0 { p / C64::new(tr, 0.0) } else { CMatrix::identity(d, d) / C64::new(d as f64, 0.0) };
    p * C64::new(1.0 - 1e-4, 0.0) + CMatrix::identity(d, d) * C64::new(1e-4 / d as f64, 0.0)
}

/// Maximum-likelihood reconstruction over `ρ = T†T / Tr(T†T)` with L-BFGS and
/// Armijo backtracking.
pub fn mle_reconstruct(data: &TomoData) -> Result<MleResult> {
    if data.freqs.len() != data.settings.len() {
        return Err(invalid("frequency table does not match settings"));
    }
    let obj = Objective::new(data);
    let t0 = psd_sqrt(&starting_point(data));
    let mut x: Vec<f64> = Vec::with_capacity(2 * obj.d * obj.d);
    for r in 0..obj.d {
        for c in 0..obj.d {
            x.push(t0[(r, c)].re);
            x.push(t0[(r, c)].im);
        }
    }
    let (mut f, mut g) = obj.eval(&x);
    let memory = 10;
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut quiet = 0;
    while iterations < MLE_MAX_ITER {
        iterations += 1;
        // Two-loop recursion for the search direction.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        if slope.abs() < 1e-30 {
            converged = true;
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            let (ft, gt) = obj.eval(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            converged = true;
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            hist.push((s, y, 1.0 / sy));
            if hist.len() > memory {
                hist.remove(0);
            }
        }
        let improvement = f - fn_;
        x = xn;
        f = fn_;
        g = gn;
        quiet = if improvement < MLE_TOL { quiet + 1 } else { 0 };
        if quiet >= 5 {
            converged = true;
            break;
        }
    }
    let t = obj.unpack(&x);
    let mut rho = obj.rho_of(&t);
    rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    Ok(MleResult { rho: DensityMatrix::new(rho)?, converged, iterations, objective: f })
}

/// `⟨ψ|ρ|ψ⟩`, clipped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, psi: &StateVector) -> Result<f64> {
    let d = rho.matrix().nrows();
    if psi.dim() != d {
        return Err(Error::DimensionMismatch(psi.dim(), d));
    }
    let v = DVector::from_column_slice(psi.amplitudes());
    let f = (v.adjoint() * rho.matrix() * &v)[(0, 0)].re;
    Ok(f.clamp(0.0, 1.0))
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.n_qubits() != 2 {
        return Err(Error::QubitCount(rho.n_qubits()));
    }
    let yy = tensor(&[pauli_y(), pauli_y()]);
    let tilde = &yy * rho.matrix().conjugate() * &yy;
    let s = psd_sqrt(rho.matrix());
    let r = &s * tilde * &s;
    let r = (&r + r.adjoint()) * C64::new(0.5, 0.0);
    let mut l: Vec<f64> = r.symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

/// `(|↓…↓⟩ + e^{iφ}|↑…↑⟩)/√2`.
pub fn ghz_state(n: usize, phi: f64) -> Result<StateVector> {
    let d = 1usize << n;
    let mut a = vec![C64::new(0.0, 0.0); d];
    a[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    a[d - 1] = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, phi);
    StateVector::from_amplitudes(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhzFit {
    pub phi: f64,
    pub fidelity: f64,
    /// The corner coherence vanished, so `φ` is arbitrary (reported as 0).
    pub phase_undefined: bool,
}

/// Phase maximizing the GHZ fidelity: `φ = arg ρ[last, 0]`, giving
/// `F = (ρ₀₀ + ρ_LL)/2 + |ρ[last, 0]|`.
pub fn fit_ghz_phase(rho: &DensityMatrix) -> Result<GhzFit> {
    let n = rho.n_qubits();
    if !(2..=MAX_TOMO_QUBITS).contains(&n) {
        return Err(Error::QubitCount(n));
    }
    let m = rho.matrix();
    let last = m.nrows() - 1;
    let corner = m[(last, 0)];
    let undefined = corner.norm() < 1e-12;
    let phi = if undefined { 0.0 } else { corner.arg() };
    let f = fidelity(rho, &ghz_state(n, phi)?)?;
    Ok(GhzFit { phi, fidelity: f, phase_undefined: undefined })
}

/// Per-qubit readout visibility: `P_meas(↑) = offset + scale·P_true(↑)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub offset: f64,
    pub scale: f64,
}

impl Default for Visibility {
    fn default() -> Self {
        Visibility { offset: 0.0, scale: 1.0 }
    }
}

impl Visibility {
    fn check(&self) -> Result<()> {
        if self.scale <= 0.0 {
            return Err(invalid(format!("visibility scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }
}

/// `(p − offset)/scale` clipped to `[0, 1]`.
pub fn spam_correct(p_raw: f64, v: Visibility) -> Result<f64> {
    v.check()?;
    Ok(((p_raw - v.offset) / v.scale).clamp(0.0, 1.0))
}

/// Applies the per-qubit visibility channel to an outcome distribution.
pub fn spam_forward(p: &[f64], vis: &[Visibility]) -> Result<Vec<f64>> {
    apply_per_qubit(p, vis, |v| {
        v.check()?;
        Ok([[1.0 - v.offset, 1.0 - v.offset - v.scale], [v.offset, v.offset + v.scale]])
    })
}

/// Inverts the per-qubit visibility channel on an outcome distribution, then
/// clips negatives and renormalizes.
pub fn spam_correct_distribution(p: &[f64], vis: &[Visibility]) -> Result<Vec<f64>> {
    let mut out = apply_per_qubit(p, vis, |v| {
        v.check()?;
        let (a, b, c, d) = (1.0 - v.offset, 1.0 - v.offset - v.scale, v.offset, v.offset + v.scale);
        let det = a * d - b * c;
        Ok([[d / det, -b / det], [-c / det, a / det]])
    })?;
    out.iter_mut().for_each(|x| *x = x.max(0.0));
    let s: f64 = out.iter().sum();
    if s > 0.0 {
        out.iter_mut().for_each(|x| *x /= s);
    }
    Ok(out)
}

fn apply_per_qubit<F>(p: &[f64], vis: &[Visibility], mat: F) -> Result<Vec<f64>>
where
    F: Fn(&Visibility) -> Result<[[f64; 2]; 2]>,
{
    if p.len() != 1 << vis.len() {
        return Err(Error::DimensionMismatch(p.len(), 1 << vis.len()));
    }
    let mut cur = p.to_vec();
    for (k, v) in vis.iter().enumerate() {
        let m = mat(v)?;
        let bit = 1usize << k;
        let mut next = cur.clone();
        for i in (0..cur.len()).filter(|i| i & bit == 0) {
            let (lo, hi) = (cur[i], cur[i | bit]);
            next[i] = m[0][0] * lo + m[0][1] * hi;
            next[i | bit] = m[1][0] * lo + m[1][1] * hi;
        }
        cur = next;
    }
    Ok(cur)
}

impl TomoData {
    /// Applies [`spam_correct_distribution`] to every setting.
    pub fn spam_corrected(&self, vis: &[Visibility]) -> Result<Self> {
        let freqs = self.freqs.iter().map(|f| spam_correct_distribution(f, vis)).collect::<Result<_>>()?;
        Ok(TomoData { freqs, ..self.clone() })
    }
}

/// 1σ spread of `pipeline` over multinomial resamples of `data`.
pub fn bootstrap_errorbars<F>(data: &TomoData, resamples: usize, seed: u64, pipeline: F) -> Result<Vec<f64>>
where
    F: Fn(&TomoData) -> Result<Vec<f64>> + Sync,
{
    if resamples < 2 {
        return Err(invalid("bootstrap needs at least 2 resamples"));
    }
    let runs: Vec<Result<Vec<f64>>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(&[seed, tag::BOOTSTRAP, r as u64]);
            pipeline(&data.resample(&mut rng)?)
        })
        .collect();
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
    let k = runs[0].len();
    Ok((0..k)
        .map(|i| crate::stats::std_dev(&runs.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect())
}

/// Full report for one reconstruction. Sigmas are bootstrap 1σ values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomoReport {
    pub n: usize,
    pub rho_re: Vec<Vec<f64>>,
    pub rho_im: Vec<Vec<f64>>,
    /// Fidelity with the ideal target state.
    pub fidelity: f64,
    pub fidelity_sigma: Option<f64>,
    pub concurrence: Option<f64>,
    pub concurrence_sigma: Option<f64>,
    pub ghz_phase: Option<f64>,
    pub ghz_fidelity: Option<f64>,
    pub ghz_fidelity_sigma: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Reconstructs `data` and scores it against `target`; `bootstrap = 0` skips
/// the error bars.
pub fn analyze(data: &TomoData, target: &StateVector, bootstrap: usize, seed: u64) -> Result<TomoReport> {
    let n = data.n;
    let metrics = |d: &TomoData| -> Result<(MleResult, Vec<f64>)> {
        let r = mle_reconstruct(d)?;
        let mut v = vec![fidelity(&r.rho, target)?];
        if n == 2 {
            v.push(concurrence(&r.rho)?);
        }
        if n >= 3 {
            v.push(fit_ghz_phase(&r.rho)?.fidelity);
        }
        Ok((r, v))
    };
    let (mle, _) = metrics(data)?;
    let sigmas = if bootstrap >= 2 {
        Some(bootstrap_errorbars(data, bootstrap, seed, |d| metrics(d).map(|x| x.1))?)
    } else {
        None
    };
    let ghz = if n >= 3 { Some(fit_ghz_phase(&mle.rho)?) } else { None };
    let (rho_re, rho_im) = mle.rho.parts();
    Ok(TomoReport {
        n,
        rho_re,
        rho_im,
        fidelity: fidelity(&mle.rho, target)?,
        fidelity_sigma: sigmas.as_ref().map(|s| s[0]),
        concurrence: if n == 2 { Some(concurrence(&mle.rho)?) } else { None },
        concurrence_sigma: if n == 2 { sigmas.as_ref().map(|s| s[1]) } else { None },
        ghz_phase: ghz.map(|g| g.phi),
        ghz_fidelity: ghz.map(|g| g.fidelity),
        ghz_fidelity_sigma: if n >= 3 { sigmas.as_ref().map(|s| s[1]) } else { None },
        converged: mle.converged,
        iterations: mle.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Spin;

    fn bell() -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_amplitudes(vec![C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)])
            .unwrap()
    }

    #[test]
    fn settings_counts_and_rotations() {
        assert_eq!(tomo_settings(1).unwrap().len(), 3);
        let s2 = tomo_settings(2).unwrap();
        assert_eq!(s2.len(), 9);
        let covered: std::collections::BTreeSet<_> = s2.iter().flat_map(|s| s.strings()).collect();
        assert_eq!(covered.len(), 15);
        let z = crate::linalg::gate_to_dense(&pauli_z());
        for b in [Pauli::X, Pauli::Y, Pauli::Z] {
            let r = crate::linalg::gate_to_dense(&TomoSetting::pre_rotation(b));
            let got = r.adjoint() * &z * &r;
            assert!(crate::linalg::max_abs_diff(&got, &crate::linalg::gate_to_dense(&b.gate())) < 1e-12, "{b:?}");
        }
    }

    #[test]
    fn basic_expectations() {
        let down = DensityMatrix::from_pure(&StateVector::all_down(1).unwrap()).unwrap();
        let e = estimate_expectations(&down, None, 0).unwrap();
        assert!((e[&"Z".parse().unwrap()] + 1.0).abs() < 1e-12);
        assert!(e[&"X".parse().unwrap()].abs() < 1e-12);
        let b = DensityMatrix::from_pure(&bell()).unwrap();
        let e = estimate_expectations(&b, None, 0).unwrap();
        for (s, v) in [("XX", 1.0), ("YY", -1.0), ("ZZ", 1.0)] {
            assert!((e[&s.parse().unwrap()] - v).abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn fidelity_examples() {
        let b = bell();
        let rho = DensityMatrix::from_pure(&b).unwrap();
        assert!((fidelity(&rho, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!((fidelity(&DensityMatrix::maximally_mixed(2).unwrap(), &b).unwrap() - 0.25).abs() < 1e-12);
        let dd = DensityMatrix::from_pure(&StateVector::all_down(2).unwrap()).unwrap();
        assert!((fidelity(&dd, &b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn concurrence_examples() {
        let b = DensityMatrix::from_pure(&bell()).unwrap();
        assert!((concurrence(&b).unwrap() - 1.0).abs() < 1e-8);
        let prod = StateVector::basis_state(2, &[Spin::Up, Spin::Down]).unwrap();
        assert!(concurrence(&DensityMatrix::from_pure(&prod).unwrap()).unwrap() < 1e-8);
        let w = b.matrix() * C64::new(0.5, 0.0) + DensityMatrix::maximally_mixed(2).unwrap().matrix() * C64::new(0.5, 0.0);
        assert!((concurrence(&DensityMatrix::new(w).unwrap()).unwrap() - 0.25).abs() < 1e-8);
    }

    #[test]
    fn ghz_phase_cases() {
        let rho = DensityMatrix::from_pure(&ghz_state(3, 0.3).unwrap()).unwrap();
        let f = fit_ghz_phase(&rho).unwrap();
        assert!((f.phi - 0.3).abs() < 1e-12 && (f.fidelity - 1.0).abs() < 1e-12);
        let mut m = rho.matrix().clone();
        m[(7, 0)] *= C64::new(0.8, 0.0);
        m[(0, 7)] *= C64::new(0.8, 0.0);
        let f = fit_ghz_phase(&DensityMatrix::new(m.clone()).unwrap()).unwrap();
        assert!((f.fidelity - 0.9).abs() < 1e-12);
        m[(7, 0)] = C64::new(0.0, 0.0);
        m[(0, 7)] = C64::new(0.0, 0.0);
        let f = fit_ghz_phase(&DensityMatrix::new(m).unwrap()).unwrap();
        assert!(f.phase_undefined && (f.fidelity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spam_examples() {
        assert_eq!(spam_correct(0.3, Visibility::default()).unwrap(), 0.3);
        assert!((spam_correct(0.55, Visibility { offset: 0.1, scale: 0.8 }).unwrap() - 0.5625).abs() < 1e-15);
        assert!(spam_correct(0.5, Visibility { offset: 0.0, scale: 0.0 }).is_err());
        let p = [0.1, 0.2, 0.3, 0.4];
        let vis = [Visibility { offset: 0.05, scale: 0.9 }, Visibility { offset: 0.1, scale: 0.8 }];
        let back = spam_correct_distribution(&spam_forward(&p, &vis).unwrap(), &vis).unwrap();
        for (a, b) in back.iter().zip(p) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mle_round_trips() {
        let b = bell();
        let r = mle_reconstruct(&TomoData::exact(&DensityMatrix::from_pure(&b).unwrap()).unwrap()).unwrap();
        assert!(fidelity(&r.rho, &b).unwrap() > 0.9999);
        let mixed = mle_reconstruct(&TomoData::exact(&DensityMatrix::maximally_mixed(2).unwrap()).unwrap()).unwrap();
        let eye = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(crate::linalg::max_abs_diff(mixed.rho.matrix(), eye.matrix()) < 1e-6);
    }

    #[test]
    fn exact_bootstrap_has_zero_spread() {
        let data = TomoData::exact(&DensityMatrix::from_pure(&bell()).unwrap()).unwrap();
        let s = bootstrap_errorbars(&data, 5, 1, |d| Ok(vec![d.expectations()[&"ZZ".parse().unwrap()]])).unwrap();
        assert_eq!(s, vec![0.0]);
    }
}
