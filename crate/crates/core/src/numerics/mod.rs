//! Numerical kernels: dense complex matrices and a small convex QP solver.

mod cmat;
mod qp;

pub use cmat::{CMat, CholeskyFactor, NumericsError, DEFAULT_CONDITION_CAP};
pub use qp::{solve_qp, QpProblem, DEFAULT_QP_ITERATION_CAP};

use num_complex::Complex64;

/// Conjugate (Hermitian) dot product `a^H b`.
pub fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Squared Euclidean norm of a complex vector.
pub fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}
