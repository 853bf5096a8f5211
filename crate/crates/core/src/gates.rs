//! Single-qubit matrices in the simulator's spin convention.
//!
//! Basis order is `(|↓⟩, |↑⟩)`, so Pauli-Z is `diag(-1, +1)`: `Z|↓⟩ = -|↓⟩`.
//! This is the reverse of the textbook `diag(1, -1)` layout; the Pauli algebra
//! (`XY = iZ`) is preserved, which forces `Y = [[0, i], [-i, 0]]` here.
//! Rotations follow `R_P(θ) = exp(-iθP/2)`.

use nalgebra::Matrix2;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Gate2 = Matrix2<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn identity() -> Gate2 {
    Gate2::identity()
}

pub fn pauli_x() -> Gate2 {
    Gate2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> Gate2 {
    Gate2::new(ZERO, I, -I, ZERO)
}

pub fn pauli_z() -> Gate2 {
    Gate2::new(-ONE, ZERO, ZERO, ONE)
}

/// `exp(-(i/2)(nx·X + ny·Y + nz·Z))` in closed form.
pub fn su2_exp(nx: f64, ny: f64, nz: f64) -> Gate2 {
    let r = (nx * nx + ny * ny + nz * nz).sqrt();
    if r == 0.0 {
        return identity();
    }
    let (s, c) = (r / 2.0).sin_cos();
    let k = s / r;
    // c·I - i·k·(nx X + ny Y + nz Z)
    let generator = pauli_x() * C64::new(nx, 0.0)
        + pauli_y() * C64::new(ny, 0.0)
        + pauli_z() * C64::new(nz, 0.0);
    identity() * C64::new(c, 0.0) - generator * C64::new(0.0, k)
}

pub fn rx(theta: f64) -> Gate2 {
    su2_exp(theta, 0.0, 0.0)
}

pub fn ry(theta: f64) -> Gate2 {
    su2_exp(0.0, theta, 0.0)
}

pub fn rz(theta: f64) -> Gate2 {
    su2_exp(0.0, 0.0, theta)
}

/// Max elementwise deviation of `u†u` from identity.
pub fn unitarity_deviation(u: &Gate2) -> f64 {
    let p = u.adjoint() * u - identity();
    p.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
