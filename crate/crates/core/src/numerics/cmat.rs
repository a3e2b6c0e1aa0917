//! Dense complex matrices with the handful of factorizations the rest of
//! the crate needs: LU with partial pivoting (inverse, determinant) and
//! Cholesky for Hermitian positive definite systems.
//!
//! Matrices are row-major over `Complex64`. Sizes here are small (at most
//! a few hundred), so plain triple loops are fast enough and keep the
//! results bit-deterministic across platforms.

use std::fmt;

use num_complex::Complex64;

/// Relative condition-number cap for [`CMat::inverse`].
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

/// Pivot threshold relative to the matrix magnitude; below it the matrix
/// is treated as singular.
const PIVOT_REL_TOL: f64 = 1e-14;

/// Errors from the numerical kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum NumericsError {
    /// A constructor received a NaN or infinite entry.
    NonFinite,
    /// Operand shapes are incompatible.
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// A square matrix was required.
    NotSquare,
    /// A pivot fell below the singularity threshold, or the condition
    /// number exceeded the configured cap.
    SingularMatrix,
    /// Cholesky failed: the matrix is not positive definite.
    NotPositiveDefinite,
    /// The QP feasible set is empty.
    Infeasible(String),
    /// The QP iteration cap was reached before the residual target.
    MaxIterations,
    /// A problem description violates its invariants.
    InvalidProblem(String),
}

impl fmt::Display for NumericsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericsError::NonFinite => write!(f, "matrix entries must be finite"),
            NumericsError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected:?}, got {got:?}")
            }
            NumericsError::NotSquare => write!(f, "matrix must be square"),
            NumericsError::SingularMatrix => write!(f, "matrix is singular or ill-conditioned"),
            NumericsError::NotPositiveDefinite => {
                write!(f, "matrix is not positive definite")
            }
            NumericsError::Infeasible(why) => write!(f, "infeasible problem: {why}"),
            NumericsError::MaxIterations => write!(f, "iteration cap reached"),
            NumericsError::InvalidProblem(why) => write!(f, "invalid problem: {why}"),
        }
    }
}

impl std::error::Error for NumericsError {}

/// Dense complex matrix, row-major.
///
/// Zero-sized matrices are allowed so that repeater-free systems (`N = 0`)
/// flow through the same code paths; `det` of a 0x0 matrix is 1.
#[derive(Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for c in 0..self.cols.min(8) {
                let z = self.get(r, c);
                write!(f, "{:+.3e}{:+.3e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Build from a closure over `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    /// Build from nested rows, checking that every entry is finite.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, NumericsError> {
        let nr = rows.len();
        let nc = if nr == 0 { 0 } else { rows[0].len() };
        let mut m = CMat::zeros(nr, nc);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != nc {
                return Err(NumericsError::DimensionMismatch {
                    expected: (nr, nc),
                    got: (nr, row.len()),
                });
            }
            for (c, &z) in row.iter().enumerate() {
                m.set(r, c, z);
            }
        }
        m.check_finite()?;
        Ok(m)
    }

    /// Square diagonal matrix from a vector.
    pub fn diag(d: &[Complex64]) -> Self {
        let mut m = CMat::zeros(d.len(), d.len());
        for (i, &z) in d.iter().enumerate() {
            m.set(i, i, z);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn check_finite(&self) -> Result<(), NumericsError> {
        if self
            .data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
        {
            Ok(())
        } else {
            Err(NumericsError::NonFinite)
        }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        m
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        m
    }

    pub fn scale(&self, s: Complex64) -> CMat {
        let mut m = self.clone();
        for a in m.data.iter_mut() {
            *a *= s;
        }
        m
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(
            self.cols, other.rows,
            "inner dimensions must agree: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = CMat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..other.cols {
                    let v = out.get(r, c) + a * other.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .map(|(a, x)| a * x)
                    .sum::<Complex64>()
            })
            .collect()
    }

    /// Scale column `c` by `s` in place.
    pub fn scale_col(&mut self, c: usize, s: Complex64) {
        for r in 0..self.rows {
            let v = self.get(r, c) * s;
            self.set(r, c, v);
        }
    }

    /// LU factorization with partial pivoting. Returns the packed factors,
    /// the pivot permutation, and the sign of the permutation; `None` in
    /// the sign slot of a pivot means exact singularity was hit.
    fn lu(&self) -> (Vec<Complex64>, Vec<usize>, f64, f64) {
        debug_assert!(self.is_square());
        let n = self.rows;
        let mut a = self.data.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            // choose pivot
            let mut p = k;
            let mut best = a[k * n + k].norm();
            for r in (k + 1)..n {
                let m = a[r * n + k].norm();
                if m > best {
                    best = m;
                    p = r;
                }
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                piv.swap(k, p);
                sign = -sign;
            }
            let pivot = a[k * n + k];
            min_pivot = min_pivot.min(pivot.norm());
            if pivot.norm() == 0.0 {
                continue; // determinant will come out exactly zero
            }
            for r in (k + 1)..n {
                let factor = a[r * n + k] / pivot;
                a[r * n + k] = factor;
                for c in (k + 1)..n {
                    let sub = factor * a[k * n + c];
                    a[r * n + c] -= sub;
                }
            }
        }
        if n == 0 {
            min_pivot = f64::INFINITY;
        }
        (a, piv, sign, min_pivot)
    }

    /// Determinant via pivoted elimination. Returns exactly zero when a
    /// zero pivot is encountered; never errors.
    pub fn det(&self) -> Complex64 {
        assert!(self.is_square(), "determinant requires a square matrix");
        let n = self.rows;
        if n == 0 {
            return Complex64::new(1.0, 0.0);
        }
        let (a, _, sign, _) = self.lu();
        let mut det = Complex64::new(sign, 0.0);
        for k in 0..n {
            det *= a[k * n + k];
        }
        det
    }

    /// Inverse with the default condition cap of `1e12`.
    pub fn inverse(&self) -> Result<CMat, NumericsError> {
        self.inverse_with_cap(DEFAULT_CONDITION_CAP)
    }

    /// Inverse via LU with partial pivoting.
    ///
    /// Fails with [`NumericsError::SingularMatrix`] if a pivot falls below
    /// `1e-14 * max|a_ij|` or if the estimated infinity-norm condition
    /// number exceeds `cond_cap`. Near-singular matrices are rejected
    /// rather than silently regularized, because a blowing-up inverse is a
    /// signal (operation at the instability boundary), not noise.
    pub fn inverse_with_cap(&self, cond_cap: f64) -> Result<CMat, NumericsError> {
        if !self.is_square() {
            return Err(NumericsError::NotSquare);
        }
        let n = self.rows;
        if n == 0 {
            return Ok(CMat::zeros(0, 0));
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return Err(NumericsError::SingularMatrix);
        }
        let (a, piv, _, min_pivot) = self.lu();
        if min_pivot < PIVOT_REL_TOL * scale {
            return Err(NumericsError::SingularMatrix);
        }
        // solve A X = I column by column through the packed factors
        let mut inv = CMat::zeros(n, n);
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for col in 0..n {
            for r in 0..n {
                x[r] = if piv[r] == col {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            // forward substitution with unit lower factor
            for r in 1..n {
                for k in 0..r {
                    let sub = a[r * n + k] * x[k];
                    x[r] -= sub;
                }
            }
            // back substitution with the upper factor
            for r in (0..n).rev() {
                for k in (r + 1)..n {
                    let sub = a[r * n + k] * x[k];
                    x[r] -= sub;
                }
                x[r] /= a[r * n + r];
            }
            for r in 0..n {
                inv.set(r, col, x[r]);
            }
        }
        let cond = self.norm_inf() * inv.norm_inf();
        if !cond.is_finite() || cond > cond_cap {
            return Err(NumericsError::SingularMatrix);
        }
        Ok(inv)
    }

    /// Cholesky factorization `A = L L^H` of a Hermitian positive definite
    /// matrix. Only the lower triangle of `self` is read.
    pub fn cholesky(&self) -> Result<CholeskyFactor, NumericsError> {
        if !self.is_square() {
            return Err(NumericsError::NotSquare);
        }
        let n = self.rows;
        let mut l = CMat::zeros(n, n);
        for j in 0..n {
            let mut d = self.get(j, j).re;
            for k in 0..j {
                d -= l.get(j, k).norm_sqr();
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(NumericsError::NotPositiveDefinite);
            }
            let djj = d.sqrt();
            l.set(j, j, Complex64::new(djj, 0.0));
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k).conj();
                }
                l.set(i, j, s / djj);
            }
        }
        Ok(CholeskyFactor { l })
    }
}

/// Lower-triangular Cholesky factor of a Hermitian positive definite
/// matrix.
pub struct CholeskyFactor {
    l: CMat,
}

impl CholeskyFactor {
    /// Solve `A x = b` through the factor.
    pub fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        // L y = b
        for i in 0..n {
            for k in 0..i {
                let sub = self.l.get(i, k) * y[k];
                y[i] -= sub;
            }
            y[i] /= self.l.get(i, i);
        }
        // L^H x = y
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let sub = self.l.get(k, i).conj() * y[k];
                y[i] -= sub;
            }
            y[i] /= self.l.get(i, i);
        }
        y
    }

    /// Solve `A X = B` column by column.
    pub fn solve_mat(&self, b: &CMat) -> CMat {
        let mut out = CMat::zeros(b.rows(), b.cols());
        for c in 0..b.cols() {
            let x = self.solve_vec(&b.col(c));
            for r in 0..b.rows() {
                out.set(r, c, x[r]);
            }
        }
        out
    }

    /// Forward-substitute `L W = B`, the whitening half-solve.
    pub fn forward_solve_mat(&self, b: &CMat) -> CMat {
        let n = self.l.rows();
        assert_eq!(b.rows(), n);
        let mut out = b.clone();
        for c in 0..b.cols() {
            for i in 0..n {
                let mut v = out.get(i, c);
                for k in 0..i {
                    v -= self.l.get(i, k) * out.get(k, c);
                }
                out.set(i, c, v / self.l.get(i, i));
            }
        }
        out
    }

    /// `ln det A` of the factored matrix (real, since A is Hermitian PD).
    pub fn ln_det(&self) -> f64 {
        (0..self.l.rows())
            .map(|i| self.l.get(i, i).re.ln())
            .sum::<f64>()
            * 2.0
    }
}
