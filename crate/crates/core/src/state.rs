//! Dense state vectors for registers of up to [`MAX_QUBITS`] spins.
//!
//! Encoding: qubit label `k` (1-based, counted from the left end of the
//! array) is bit `k - 1` of the amplitude index, bit 0 least significant.
//! A set bit means `|↑⟩`. See [`crate::gates`] for the matching Pauli matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{unitarity_deviation, Gate2, C64};

pub const MAX_QUBITS: usize = 10;

/// Default tolerance for the unitarity check on gate matrices.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spin {
    Down,
    Up,
}

impl Spin {
    pub fn bit(self) -> usize {
        match self {
            Spin::Down => 0,
            Spin::Up => 1,
        }
    }

    pub fn from_bit(bit: usize) -> Spin {
        if bit & 1 == 1 {
            Spin::Up
        } else {
            Spin::Down
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Down => Spin::Up,
            Spin::Up => Spin::Down,
        }
    }
}

/// Computational-basis projectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Projector {
    Basis(usize),
    Qubit { q: usize, spin: Spin },
    Pair { q1: usize, q2: usize, spins: [Spin; 2] },
    /// Even (parallel) or odd (antiparallel) subspace of a pair.
    Parity { q1: usize, q2: usize, even: bool },
    Mask(Vec<bool>),
}

impl Projector {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Projector::Basis(i) if *i >= 1 << n => Err(Error::DimensionMismatch(*i, 1 << n)),
            Projector::Qubit { q, .. } => check_label(*q, n),
            Projector::Pair { q1, q2, .. } | Projector::Parity { q1, q2, .. } => {
                check_pair(*q1, *q2, n)
            }
            Projector::Mask(m) if m.len() != 1 << n => {
                Err(Error::DimensionMismatch(m.len(), 1 << n))
            }
            _ => Ok(()),
        }
    }

    pub fn contains(&self, index: usize) -> bool {
        let bit = |q: usize| (index >> (q - 1)) & 1;
        match self {
            Projector::Basis(i) => index == *i,
            Projector::Qubit { q, spin } => bit(*q) == spin.bit(),
            Projector::Pair { q1, q2, spins } => {
                bit(*q1) == spins[0].bit() && bit(*q2) == spins[1].bit()
            }
            Projector::Parity { q1, q2, even } => (bit(*q1) == bit(*q2)) == *even,
            Projector::Mask(m) => m[index],
        }
    }
}

/// Bit-mask form of a projector, so hot loops avoid re-matching per index.
#[derive(Clone, Copy)]
enum Membership {
    /// `index & mask == value`.
    Masked { mask: usize, value: usize },
    /// Parity of the two masked bits equals `odd`.
    Parity { a: usize, b: usize, odd: bool },
    Generic,
}

impl Membership {
    #[inline]
    fn contains(self, p: &Projector, index: usize) -> bool {
        match self {
            Membership::Masked { mask, value } => index & mask == value,
            Membership::Parity { a, b, odd } => ((index & a != 0) != (index & b != 0)) == odd,
            Membership::Generic => p.contains(index),
        }
    }
}

impl Projector {
    fn membership(&self) -> Membership {
        let m = |q: usize| 1usize << (q - 1);
        match self {
            Projector::Basis(i) => Membership::Masked { mask: usize::MAX, value: *i },
            Projector::Qubit { q, spin } => Membership::Masked { mask: m(*q), value: spin.bit() * m(*q) },
            Projector::Pair { q1, q2, spins } => Membership::Masked {
                mask: m(*q1) | m(*q2),
                value: (spins[0].bit() * m(*q1)) | (spins[1].bit() * m(*q2)),
            },
            Projector::Parity { q1, q2, even } => Membership::Parity { a: m(*q1), b: m(*q2), odd: !even },
            Projector::Mask(_) => Membership::Generic,
        }
    }
}

pub(crate) fn check_label(q: usize, n: usize) -> Result<()> {
    if q == 0 || q > n {
        Err(Error::QubitLabel { label: q, n })
    } else {
        Ok(())
    }
}

pub(crate) fn check_pair(q1: usize, q2: usize, n: usize) -> Result<()> {
    check_label(q1, n)?;
    check_label(q2, n)?;
    if q1 == q2 {
        return Err(Error::SameQubit(q1));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// `|↓⟩^{⊗n}`, the ground state of `h Σ Z_i` for `h > 0`.
    pub fn all_down(n: usize) -> Result<Self> {
        Self::basis_index(n, 0)
    }

    pub fn basis_state(n: usize, spins: &[Spin]) -> Result<Self> {
        if spins.len() != n {
            return Err(Error::BitLength { got: spins.len(), expected: n });
        }
        let index = spins
            .iter()
            .enumerate()
            .fold(0usize, |acc, (k, s)| acc | (s.bit() << k));
        Self::basis_index(n, index)
    }

    pub fn basis_index(n: usize, index: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::QubitCount(n));
        }
        if index >= 1 << n {
            return Err(Error::DimensionMismatch(index, 1 << n));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << n];
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(StateVector { n_qubits: n, amplitudes })
    }

    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let dim = amplitudes.len();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::DimensionMismatch(dim, dim.next_power_of_two()));
        }
        let n = dim.trailing_zeros() as usize;
        if n > MAX_QUBITS {
            return Err(Error::QubitCount(n));
        }
        let mut s = StateVector { n_qubits: n, amplitudes };
        let norm = s.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroProbability);
        }
        s.scale(1.0 / norm);
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn scale(&mut self, k: f64) {
        for a in &mut self.amplitudes {
            *a *= k;
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apply_1q(&mut self, u: &Gate2, q: usize) -> Result<()> {
        self.apply_1q_with_tol(u, q, UNITARY_TOL)
    }

    pub fn apply_1q_with_tol(&mut self, u: &Gate2, q: usize, tol: f64) -> Result<()> {
        check_label(q, self.n_qubits)?;
        let dev = unitarity_deviation(u);
        if dev > tol {
            return Err(Error::NonUnitary(dev));
        }
        self.apply_1q_unchecked(u, q);
        Ok(())
    }

    pub(crate) fn apply_1q_unchecked(&mut self, u: &Gate2, q: usize) {
        let stride = 1usize << (q - 1);
        let (u00, u01, u10, u11) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
        for base in 0..self.amplitudes.len() {
            if base & stride != 0 {
                continue;
            }
            let a0 = self.amplitudes[base];
            let a1 = self.amplitudes[base | stride];
            self.amplitudes[base] = u00 * a0 + u01 * a1;
            self.amplitudes[base | stride] = u10 * a0 + u11 * a1;
        }
    }

    /// Applies `u` to `target` on the branch where `control` is `|↑⟩`.
    pub fn apply_controlled_1q(&mut self, control: usize, target: usize, u: &Gate2) -> Result<()> {
        check_pair(control, target, self.n_qubits)?;
        let dev = unitarity_deviation(u);
        if dev > UNITARY_TOL {
            return Err(Error::NonUnitary(dev));
        }
        let c = 1usize << (control - 1);
        let t = 1usize << (target - 1);
        for base in 0..self.amplitudes.len() {
            if base & c == 0 || base & t != 0 {
                continue;
            }
            let a0 = self.amplitudes[base];
            let a1 = self.amplitudes[base | t];
            self.amplitudes[base] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
            self.amplitudes[base | t] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
        }
        Ok(())
    }

    /// Textbook CNOT: flips `target` when `control` is `|↑⟩`.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        check_pair(control, target, self.n_qubits)?;
        let c = 1usize << (control - 1);
        let t = 1usize << (target - 1);
        for base in 0..self.amplitudes.len() {
            if base & c != 0 && base & t == 0 {
                self.amplitudes.swap(base, base | t);
            }
        }
        Ok(())
    }

    /// Diagonal two-qubit phase. `phases` is indexed by `2·b(q1) + b(q2)`,
    /// i.e. in the order `↓↓, ↓↑, ↑↓, ↑↑` for the pair `(q1, q2)`.
    pub fn apply_controlled_phase(&mut self, q1: usize, q2: usize, phases: &[C64; 4]) -> Result<()> {
        check_pair(q1, q2, self.n_qubits)?;
        if let Some(k) = phases.iter().position(|p| (p.norm() - 1.0).abs() > UNITARY_TOL) {
            return Err(Error::NonUnitPhase(k));
        }
        let m1 = 1usize << (q1 - 1);
        let m2 = 1usize << (q2 - 1);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            let k = (usize::from(i & m1 != 0) << 1) | usize::from(i & m2 != 0);
            *a *= phases[k];
        }
        Ok(())
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn prob_up(&self, q: usize) -> Result<f64> {
        check_label(q, self.n_qubits)?;
        let m = 1usize << (q - 1);
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & m != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// `⟨Z_q⟩` with `Z = diag(-1, +1)`.
    pub fn expectation_z(&self, q: usize) -> Result<f64> {
        let up = self.prob_up(q)?;
        let total = self.norm().powi(2);
        Ok((2.0 * up - total).clamp(-1.0, 1.0))
    }

    pub fn probability(&self, projector: &Projector) -> Result<f64> {
        projector.validate(self.n_qubits)?;
        let test = projector.membership();
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| test.contains(projector, *i))
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Returns `⟨s|P|s⟩` and `P|s⟩`, renormalized when requested.
    pub fn project(&self, projector: &Projector, renormalize: bool) -> Result<(f64, StateVector)> {
        projector.validate(self.n_qubits)?;
        let test = projector.membership();
        let mut out = self.clone();
        let mut prob = 0.0;
        for (i, a) in out.amplitudes.iter_mut().enumerate() {
            if test.contains(projector, i) {
                prob += a.norm_sqr();
            } else {
                *a = C64::new(0.0, 0.0);
            }
        }
        if renormalize {
            if prob <= 0.0 {
                return Err(Error::ZeroProbability);
            }
            out.scale(1.0 / prob.sqrt());
        }
        Ok((prob, out))
    }

    /// Overwrites qubit `q` with the given spin, keeping the rest of the register.
    ///
    /// Amplitudes are moved from the opposite branch; the state must already be
    /// a product with respect to `q` for this to be norm-preserving.
    pub(crate) fn set_spin_product(&mut self, q: usize, spin: Spin) {
        let m = 1usize << (q - 1);
        for base in 0..self.amplitudes.len() {
            if base & m != 0 {
                continue;
            }
            let (keep, drop) = match spin {
                Spin::Down => (base, base | m),
                Spin::Up => (base | m, base),
            };
            let moved = self.amplitudes[base] + self.amplitudes[base | m];
            self.amplitudes[keep] = moved;
            self.amplitudes[drop] = C64::new(0.0, 0.0);
        }
    }

    /// `|⟨a|b⟩|²` for normalized states.
    pub fn fidelity_with(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner_product(other)?.norm_sqr())
    }
}
