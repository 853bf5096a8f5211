//! Dense complex matrix helpers used by the oracles and by tomography.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gates::{Gate2, C64};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn gate_to_dense(u: &Gate2) -> CMatrix {
    CMatrix::from_fn(2, 2, |r, c| u[(r, c)])
}

/// Lifts a single-qubit operator on qubit `q` (1-based) to an `n`-qubit register.
///
/// Qubit 1 is the least significant bit, so it is the rightmost Kronecker factor.
pub fn embed_1q(u: &Gate2, q: usize, n: usize) -> CMatrix {
    let eye = CMatrix::identity(2, 2);
    let op = gate_to_dense(u);
    let mut out = CMatrix::identity(1, 1);
    for k in (1..=n).rev() {
        out = kron(&out, if k == q { &op } else { &eye });
    }
    out
}

/// Tensor product of per-qubit operators, `ops[0]` acting on qubit 1.
pub fn tensor(ops: &[Gate2]) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for u in ops.iter().rev() {
        out = kron(&out, &gate_to_dense(u));
    }
    out
}

/// `exp(-i·t·H)` for Hermitian `H` via its eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let eig = h.clone().symmetric_eigen();
    let phases = CVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&e| C64::from_polar(1.0, -t * e)),
    );
    let v = &eig.eigenvectors;
    v * CMatrix::from_diagonal(&phases) * v.adjoint()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max elementwise deviation after aligning `b`'s global phase to `a`.
///
/// The phase is taken from the ratio at `a`'s largest-magnitude element.
pub fn phase_aligned_diff(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(a.nrows(), b.nrows()));
    }
    let (idx, _) = a
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best });
    let ratio = a[idx] / b[idx];
    if !ratio.is_finite() || ratio.norm() == 0.0 {
        return Ok(f64::INFINITY);
    }
    let phase = ratio / ratio.norm();
    Ok(max_abs_diff(a, &(b * phase)))
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    max_abs_diff(m, &m.adjoint()) <= tol
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{pauli_x, pauli_z, rx};

    #[test]
    fn embed_matches_bit_convention() {
        // Z on qubit 1 of a 2-qubit register: sign follows bit 0
        let z1 = embed_1q(&pauli_z(), 1, 2);
        let diag: Vec<f64> = (0..4).map(|i| z1[(i, i)].re).collect();
        assert_eq!(diag, vec![-1.0, 1.0, -1.0, 1.0]);
        let z2 = embed_1q(&pauli_z(), 2, 2);
        let diag: Vec<f64> = (0..4).map(|i| z2[(i, i)].re).collect();
        assert_eq!(diag, vec![-1.0, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn expm_of_pauli_x_is_rx() {
        let x = gate_to_dense(&pauli_x());
        let u = expm_hermitian(&x, 0.35);
        assert!(max_abs_diff(&u, &gate_to_dense(&rx(0.7))) < 1e-12);
    }

    #[test]
    fn phase_alignment_ignores_global_phase() {
        let a = gate_to_dense(&rx(1.1));
        let b = &a * C64::from_polar(1.0, 0.9);
        assert!(max_abs_diff(&a, &b) > 0.1);
        assert!(phase_aligned_diff(&a, &b).unwrap() < 1e-14);
    }
}
