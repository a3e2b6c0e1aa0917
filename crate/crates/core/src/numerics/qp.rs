//! Small dense convex quadratic programs.
//!
//! Solves
//!
//! ```text
//!     minimize    1/2 x' Q x + c' x
//!     subject to  lower <= x <= upper
//!                 A x <= b
//! ```
//!
//! with `Q` symmetric positive semidefinite. The solver is a
//! projected-gradient / active-set hybrid: box-only problems are warmed up
//! with a few projected-gradient sweeps to land on the right face, then a
//! primal active-set method finishes to KKT accuracy. Problems here are
//! small (tens to a few hundred variables), constraints are simple, and
//! the method is fully deterministic, which matters for reproducibility.

use super::cmat::NumericsError;

/// Iteration cap for the active-set loop.
pub const DEFAULT_QP_ITERATION_CAP: usize = 10_000;

const FEAS_TOL: f64 = 1e-12;

/// A convex QP with box bounds and linear inequality rows.
///
/// `q` is `n*n` row-major, `ineq_a` is `l*n` row-major. The feasible set
/// must contain `lower`, which is checked by [`QpProblem::validate`].
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub ineq_a: Vec<f64>,
    pub ineq_b: Vec<f64>,
}

impl QpProblem {
    /// Problem without general linear rows.
    pub fn box_only(q: Vec<f64>, c: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        QpProblem {
            q,
            c,
            lower,
            upper,
            ineq_a: Vec::new(),
            ineq_b: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn n_rows(&self) -> usize {
        self.ineq_b.len()
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        let n = self.n();
        if self.q.len() != n * n {
            return Err(NumericsError::InvalidProblem(format!(
                "Q has {} entries, expected {}",
                self.q.len(),
                n * n
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(NumericsError::InvalidProblem(
                "bound vectors must match the variable count".into(),
            ));
        }
        if self.ineq_a.len() != self.n_rows() * n {
            return Err(NumericsError::InvalidProblem(
                "ineq_a shape must be rows x n".into(),
            ));
        }
        let all = self
            .q
            .iter()
            .chain(&self.c)
            .chain(&self.lower)
            .chain(&self.upper)
            .chain(&self.ineq_a)
            .chain(&self.ineq_b);
        if !all.into_iter().all(|v| v.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        let scale = self.q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                if (self.q[i * n + j] - self.q[j * n + i]).abs() > 1e-10 * scale {
                    return Err(NumericsError::InvalidProblem(
                        "Q must be symmetric within 1e-10 relative".into(),
                    ));
                }
            }
        }
        for i in 0..n {
            if self.lower[i] > self.upper[i] {
                return Err(NumericsError::InvalidProblem(format!(
                    "lower[{i}] > upper[{i}]"
                )));
            }
        }
        for j in 0..self.n_rows() {
            let v = self.row_value(j, &self.lower);
            if v > self.ineq_b[j] + FEAS_TOL * v.abs().max(1.0) {
                return Err(NumericsError::Infeasible(format!(
                    "lower bound violates inequality row {j}"
                )));
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = self.n();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += x[i] * self.q[i * n + j] * x[j];
            }
        }
        0.5 * quad + self.c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Largest constraint violation at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for i in 0..self.n() {
            v = v.max(self.lower[i] - x[i]).max(x[i] - self.upper[i]);
        }
        for j in 0..self.n_rows() {
            v = v.max(self.row_value(j, x) - self.ineq_b[j]);
        }
        v
    }

    fn row_value(&self, j: usize, x: &[f64]) -> f64 {
        let n = self.n();
        self.ineq_a[j * n..(j + 1) * n]
            .iter()
            .zip(x)
            .map(|(a, b)| a * b)
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                self.c[i]
                    + self.q[i * n..(i + 1) * n]
                        .iter()
                        .zip(x)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Active {
    Lower(usize),
    Upper(usize),
    Row(usize),
}

/// Solve the QP to KKT residual `tol`.
///
/// The problem is normalized internally (variables to the unit scale of
/// the box, objective to unit magnitude) so the result is invariant to
/// the physical units of the data; `tol` applies to the normalized KKT
/// system. For strictly convex `Q` the minimizer is unique and the
/// result is a deterministic function of the problem data. Errors with
/// `Infeasible` when the constraint set is empty (detected at `lower`),
/// and with `MaxIterations` if the active-set loop fails to terminate
/// within [`DEFAULT_QP_ITERATION_CAP`] iterations.
pub fn solve_qp(p: &QpProblem, tol: f64) -> Result<Vec<f64>, NumericsError> {
    p.validate()?;
    let n = p.n();
    if n == 0 {
        return Ok(Vec::new());
    }

    // variable scale from the box, objective scale from the data
    let xscale = p
        .lower
        .iter()
        .chain(&p.upper)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let mut scaled = QpProblem {
        q: p.q.iter().map(|v| v * xscale * xscale).collect(),
        c: p.c.iter().map(|v| v * xscale).collect(),
        lower: p.lower.iter().map(|v| v / xscale).collect(),
        upper: p.upper.iter().map(|v| v / xscale).collect(),
        ineq_a: p.ineq_a.iter().map(|v| v * xscale).collect(),
        ineq_b: p.ineq_b.clone(),
    };
    let fscale = scaled
        .q
        .iter()
        .chain(&scaled.c)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if fscale > 0.0 {
        for v in scaled.q.iter_mut().chain(&mut scaled.c) {
            *v /= fscale;
        }
    }
    // unit-magnitude rows keep the KKT blocks balanced
    for r in 0..scaled.n_rows() {
        let row_max = scaled.ineq_a[r * n..(r + 1) * n]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if row_max > 0.0 {
            for v in &mut scaled.ineq_a[r * n..(r + 1) * n] {
                *v /= row_max;
            }
            scaled.ineq_b[r] /= row_max;
        }
    }

    let mut x = solve_normalized(&scaled, tol)?;
    for (xi, (&lo, &hi)) in x.iter_mut().zip(p.lower.iter().zip(&p.upper)) {
        *xi = (*xi * xscale).clamp(lo, hi);
    }
    Ok(x)
}

fn solve_normalized(p: &QpProblem, tol: f64) -> Result<Vec<f64>, NumericsError> {
    let n = p.n();
    let (mut x, mut working): (Vec<f64>, Vec<Active>) = if p.n_rows() == 0 {
        projected_gradient_start(p)
    } else {
        (p.lower.clone(), (0..n).map(Active::Lower).collect())
    };

    for _ in 0..DEFAULT_QP_ITERATION_CAP {
        let g = p.gradient(&x);
        let d = direction(p, &g, &working)?;
        let d_scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let x_scale = x
            .iter()
            .chain(p.upper.iter())
            .fold(1.0f64, |m, v| m.max(v.abs()));

        if d_scale <= 1e-13 * x_scale {
            // stationary on the working set; check multipliers
            match most_negative_multiplier(p, &g, &working, tol) {
                None => {
                    polish(p, &mut x);
                    return Ok(x);
                }
                Some(idx) => {
                    working.remove(idx);
                }
            }
        } else {
            // longest feasible step along d, at most 1
            let mut t = 1.0f64;
            let mut blocker: Option<Active> = None;
            for i in 0..n {
                if working_fixes(&working, i) {
                    continue;
                }
                if d[i] > 1e-15 * d_scale.max(1.0) {
                    let ti = (p.upper[i] - x[i]) / d[i];
                    if ti < t {
                        t = ti;
                        blocker = Some(Active::Upper(i));
                    }
                } else if d[i] < -1e-15 * d_scale.max(1.0) {
                    let ti = (p.lower[i] - x[i]) / d[i];
                    if ti < t {
                        t = ti;
                        blocker = Some(Active::Lower(i));
                    }
                }
            }
            for j in 0..p.n_rows() {
                if working.contains(&Active::Row(j)) {
                    continue;
                }
                let rate = p.ineq_a[j * n..(j + 1) * n]
                    .iter()
                    .zip(&d)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
                if rate > 1e-15 * d_scale.max(1.0) {
                    let tj = (p.ineq_b[j] - p.row_value(j, &x)) / rate;
                    if tj < t {
                        t = tj;
                        blocker = Some(Active::Row(j));
                    }
                }
            }
            let t = t.max(0.0);
            for i in 0..n {
                x[i] += t * d[i];
            }
            if let Some(b) = blocker {
                // land exactly on the blocking constraint
                match b {
                    Active::Lower(i) => x[i] = p.lower[i],
                    Active::Upper(i) => x[i] = p.upper[i],
                    Active::Row(_) => {}
                }
                working.push(b);
            }
        }
    }
    Err(NumericsError::MaxIterations)
}

fn working_fixes(working: &[Active], var: usize) -> bool {
    working
        .iter()
        .any(|a| matches!(a, Active::Lower(i) | Active::Upper(i) if *i == var))
}

/// A few projected-gradient sweeps on a box-only problem; returns the
/// reached point and the bounds active there as the initial working set.
fn projected_gradient_start(p: &QpProblem) -> (Vec<f64>, Vec<Active>) {
    let n = p.n();
    let mut x: Vec<f64> = (0..n)
        .map(|i| (0.0f64).clamp(p.lower[i], p.upper[i]))
        .collect();
    // row-sum bound on the spectral radius gives a safe step size
    let lip = (0..n)
        .map(|i| p.q[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    if lip > 0.0 {
        let step = 1.0 / lip;
        for _ in 0..60 {
            let g = p.gradient(&x);
            for i in 0..n {
                x[i] = (x[i] - step * g[i]).clamp(p.lower[i], p.upper[i]);
            }
        }
    }
    let mut working = Vec::new();
    for i in 0..n {
        if x[i] <= p.lower[i] {
            x[i] = p.lower[i];
            working.push(Active::Lower(i));
        } else if x[i] >= p.upper[i] {
            x[i] = p.upper[i];
            working.push(Active::Upper(i));
        }
    }
    (x, working)
}

/// Solve the equality-constrained direction subproblem on the working set:
/// fixed variables get a zero step, active rows are kept tight, and the
/// reduced KKT system is solved by dense LU. A tiny escalating Tikhonov
/// term covers semidefinite `Q` restricted to the free subspace.
fn direction(p: &QpProblem, g: &[f64], working: &[Active]) -> Result<Vec<f64>, NumericsError> {
    let n = p.n();
    let free: Vec<usize> = (0..n).filter(|&i| !working_fixes(working, i)).collect();
    let nf = free.len();
    let rows: Vec<usize> = working
        .iter()
        .filter_map(|a| match a {
            Active::Row(j) => Some(*j),
            _ => None,
        })
        .collect();
    let nr = rows.len();
    if nf == 0 {
        return Ok(vec![0.0; n]);
    }

    let dim = nf + nr;
    let q_scale = p.q.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for reg in [0.0, 1e-10 * q_scale, 1e-6 * q_scale] {
        let mut kkt = vec![0.0f64; dim * dim];
        let mut rhs = vec![0.0f64; dim];
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kkt[a * dim + b] = p.q[i * n + j];
            }
            kkt[a * dim + a] += reg;
            rhs[a] = -g[i];
        }
        for (r, &j) in rows.iter().enumerate() {
            for (a, &i) in free.iter().enumerate() {
                let v = p.ineq_a[j * n + i];
                kkt[a * dim + nf + r] = v;
                kkt[(nf + r) * dim + a] = v;
            }
        }
        if let Some(sol) = lu_solve(&mut kkt, &mut rhs, dim) {
            let mut d = vec![0.0; n];
            for (a, &i) in free.iter().enumerate() {
                d[i] = sol[a];
            }
            return Ok(d);
        }
    }
    Err(NumericsError::SingularMatrix)
}

/// Multiplier check at a stationary point of the working set. Returns the
/// index (into `working`) of the most negative multiplier, or `None` when
/// KKT holds to `tol`.
fn most_negative_multiplier(
    p: &QpProblem,
    g: &[f64],
    working: &[Active],
    tol: f64,
) -> Option<usize> {
    let n = p.n();
    // recover row multipliers from stationarity on the free variables
    let free: Vec<usize> = (0..n).filter(|&i| !working_fixes(working, i)).collect();
    let rows: Vec<usize> = working
        .iter()
        .filter_map(|a| match a {
            Active::Row(j) => Some(*j),
            _ => None,
        })
        .collect();
    let mut row_mult = vec![0.0f64; rows.len()];
    if !rows.is_empty() {
        // least-squares solve of A_f' mu = -g_f via normal equations
        let nr = rows.len();
        let mut ata = vec![0.0f64; nr * nr];
        let mut atb = vec![0.0f64; nr];
        for (r1, &j1) in rows.iter().enumerate() {
            for (r2, &j2) in rows.iter().enumerate() {
                ata[r1 * nr + r2] = free
                    .iter()
                    .map(|&i| p.ineq_a[j1 * n + i] * p.ineq_a[j2 * n + i])
                    .sum();
            }
            ata[r1 * nr + r1] += 1e-14;
            atb[r1] = -free
                .iter()
                .map(|&i| p.ineq_a[j1 * n + i] * g[i])
                .sum::<f64>();
        }
        if let Some(sol) = lu_solve(&mut ata, &mut atb, nr) {
            row_mult = sol;
        }
    }

    // residual gradient including row-multiplier contributions
    let mut resid = g.to_vec();
    for (r, &j) in rows.iter().enumerate() {
        for i in 0..n {
            resid[i] += row_mult[r] * p.ineq_a[j * n + i];
        }
    }

    let mut worst: Option<(usize, f64)> = None;
    let mut row_seen = 0usize;
    for (w, a) in working.iter().enumerate() {
        let mu = match a {
            Active::Lower(i) => resid[*i],
            Active::Upper(i) => -resid[*i],
            Active::Row(_) => {
                let m = row_mult[row_seen];
                row_seen += 1;
                m
            }
        };
        if mu < -tol && worst.is_none_or(|(_, m)| mu < m) {
            worst = Some((w, mu));
        }
    }
    worst.map(|(w, _)| w)
}

/// Snap the result exactly into the box; active-set arithmetic can leave
/// bounds off by a few ulps.
fn polish(p: &QpProblem, x: &mut [f64]) {
    for i in 0..p.n() {
        x[i] = x[i].clamp(p.lower[i], p.upper[i]);
    }
}

/// Dense LU solve with partial pivoting; returns `None` on a vanishing
/// pivot. `a` and `b` are clobbered.
fn lu_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if n == 0 {
        return Some(Vec::new());
    }
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].abs();
        for r in (k + 1)..n {
            if a[r * n + k].abs() > best {
                best = a[r * n + k].abs();
                piv = r;
            }
        }
        if best <= 1e-14 * scale.max(1.0) {
            return None;
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            b.swap(k, piv);
        }
        for r in (k + 1)..n {
            let f = a[r * n + k] / a[k * n + k];
            a[r * n + k] = 0.0;
            for c in (k + 1)..n {
                a[r * n + c] -= f * a[k * n + c];
            }
            b[r] -= f * b[k];
        }
    }
    for r in (0..n).rev() {
        for c in (r + 1)..n {
            b[r] -= a[r * n + c] * b[c];
        }
        b[r] /= a[r * n + r];
    }
    Some(b.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn eye(n: usize) -> Vec<f64> {
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        q
    }

    #[test]
    fn interior_minimum_at_origin() {
        let p = QpProblem::box_only(eye(2), vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]);
        let x = solve_qp(&p, 1e-8).unwrap();
        assert!(x[0].abs() < 1e-10 && x[1].abs() < 1e-10);
    }

    #[test]
    fn minimum_at_box_edge() {
        let p = QpProblem::box_only(eye(2), vec![-1.0, -1.0], vec![0.0, 0.0], vec![1.0, 1.0]);
        let x = solve_qp(&p, 1e-8).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn active_linear_row() {
        // min 1/2|x|^2 - x1 - x2 s.t. x1 + x2 <= 1 inside [0,2]^2
        let p = QpProblem {
            q: eye(2),
            c: vec![-1.0, -1.0],
            lower: vec![0.0, 0.0],
            upper: vec![2.0, 2.0],
            ineq_a: vec![1.0, 1.0],
            ineq_b: vec![1.0],
        };
        let x = solve_qp(&p, 1e-8).unwrap();
        assert!(
            (x[0] - 0.5).abs() < 1e-9 && (x[1] - 0.5).abs() < 1e-9,
            "{x:?}"
        );
    }

    #[test]
    fn infeasible_is_detected() {
        let p = QpProblem {
            q: eye(1),
            c: vec![0.0],
            lower: vec![1.0],
            upper: vec![2.0],
            ineq_a: vec![1.0],
            ineq_b: vec![0.5],
        };
        assert!(matches!(
            solve_qp(&p, 1e-8),
            Err(NumericsError::Infeasible(_))
        ));
    }

    #[test]
    fn asymmetric_q_is_rejected() {
        let p = QpProblem::box_only(
            vec![1.0, 0.5, 0.0, 1.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        );
        assert!(matches!(
            solve_qp(&p, 1e-8),
            Err(NumericsError::InvalidProblem(_))
        ));
    }

    fn random_psd_problem(n: usize, rng: &mut impl Rng, with_row: bool) -> QpProblem {
        // Q = B' B + delta I keeps it strictly convex
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                q[i * n + j] = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum::<f64>();
            }
            q[i * n + i] += 0.2;
        }
        let c: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let lower: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 0.1).collect();
        let upper: Vec<f64> = lower
            .iter()
            .map(|l| l + 0.1 + rng.gen::<f64>() * 0.15)
            .collect();
        let (ineq_a, ineq_b) = if with_row {
            let a: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let at_lower: f64 = a.iter().zip(&lower).map(|(x, y)| x * y).sum();
            let at_upper: f64 = a.iter().zip(&upper).map(|(x, y)| x * y).sum();
            // put the row strictly between the corners so it can be active
            (a, vec![at_lower + 0.4 * (at_upper - at_lower)])
        } else {
            (Vec::new(), Vec::new())
        };
        QpProblem {
            q,
            c,
            lower,
            upper,
            ineq_a,
            ineq_b,
        }
    }

    #[test]
    fn never_violates_constraints() {
        let mut rng = crate::rng::stream_rng(21, crate::rng::StreamPurpose::Aux, 0);
        for trial in 0..50 {
            let p = random_psd_problem(4, &mut rng, trial % 2 == 0);
            let x = solve_qp(&p, 1e-8).unwrap();
            assert!(
                p.max_violation(&x) <= 1e-8,
                "violation {}",
                p.max_violation(&x)
            );
        }
    }

    #[test]
    fn beats_box_vertices() {
        let mut rng = crate::rng::stream_rng(22, crate::rng::StreamPurpose::Aux, 0);
        for _ in 0..20 {
            let p = random_psd_problem(3, &mut rng, false);
            let x = solve_qp(&p, 1e-8).unwrap();
            let fx = p.objective(&x);
            for mask in 0..8usize {
                let v: Vec<f64> = (0..3)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            p.upper[i]
                        } else {
                            p.lower[i]
                        }
                    })
                    .collect();
                assert!(fx <= p.objective(&v) + 1e-8);
            }
        }
    }

    /// Brute-force grid oracle on a 3-dimensional problem with one active
    /// linear constraint, built around a known lattice minimizer via the
    /// KKT conditions so the grid argmin pins the true optimum.
    #[test]
    fn matches_grid_search_oracle() {
        let mut rng = crate::rng::stream_rng(23, crate::rng::StreamPurpose::Aux, 1);
        let step = 1e-3;
        for _ in 0..5 {
            let b: Vec<f64> = (0..9).map(|_| rng.gen::<f64>() - 0.5).collect();
            let mut q = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    q[i * 3 + j] = (0..3).map(|l| b[l * 3 + i] * b[l * 3 + j]).sum::<f64>();
                }
                q[i * 3 + i] += 1.0;
            }
            let lower: Vec<f64> = (0..3)
                .map(|_| (rng.gen::<f64>() * 50.0).round() * step)
                .collect();
            let upper: Vec<f64> = lower
                .iter()
                .map(|l| l + (100.0 + (rng.gen::<f64>() * 100.0).round()) * step)
                .collect();
            let x_star: Vec<f64> = (0..3)
                .map(|i| {
                    let span = ((upper[i] - lower[i]) / step).round() as i64;
                    lower[i] + (20 + rng.gen_range(0..(span - 40))) as f64 * step
                })
                .collect();
            let a: Vec<f64> = (0..3).map(|_| (1 + rng.gen_range(0..3)) as f64).collect();
            let row_b: f64 = a.iter().zip(&x_star).map(|(u, v)| u * v).sum();
            let mu = 0.1 + 1.9 * rng.gen::<f64>();
            let c: Vec<f64> = (0..3)
                .map(|i| -(0..3).map(|j| q[i * 3 + j] * x_star[j]).sum::<f64>() - mu * a[i])
                .collect();
            let p = QpProblem {
                q,
                c,
                lower,
                upper,
                ineq_a: a,
                ineq_b: vec![row_b],
            };
            let x = solve_qp(&p, 1e-8).unwrap();
            let g = grid_argmin(&p, step);
            for i in 0..3 {
                assert!(
                    (x[i] - g[i]).abs() <= 2e-3,
                    "coordinate {i}: solver {} vs grid {}",
                    x[i],
                    g[i]
                );
            }
        }
    }

    pub fn grid_argmin(p: &QpProblem, step: f64) -> Vec<f64> {
        let counts: Vec<usize> = (0..p.n())
            .map(|i| ((p.upper[i] - p.lower[i]) / step).round() as usize + 1)
            .collect();
        let mut best = f64::INFINITY;
        let mut arg = p.lower.clone();
        let mut x = vec![0.0; 3];
        for a in 0..counts[0] {
            x[0] = p.lower[0] + a as f64 * step;
            for b in 0..counts[1] {
                x[1] = p.lower[1] + b as f64 * step;
                for c in 0..counts[2] {
                    x[2] = p.lower[2] + c as f64 * step;
                    if p.max_violation(&x) > 1e-12 {
                        continue;
                    }
                    let f = p.objective(&x);
                    if f < best {
                        best = f;
                        arg = x.clone();
                    }
                }
            }
        }
        arg
    }

    #[test]
    fn scalar_problem_matches_clamp() {
        let mut rng = crate::rng::stream_rng(24, crate::rng::StreamPurpose::Aux, 0);
        for _ in 0..200 {
            let gamma = rng.gen::<f64>() * 3.0 + 0.01;
            let psi = rng.gen::<f64>() * 4.0 - 2.0;
            let ub = rng.gen::<f64>() * 2.0;
            let p = QpProblem::box_only(vec![gamma], vec![psi], vec![0.0], vec![ub]);
            let x = solve_qp(&p, 1e-10).unwrap();
            let expect = (-psi / gamma).clamp(0.0, ub);
            assert!(
                (x[0] - expect).abs() <= 1e-12 * (1.0 + expect.abs()),
                "{} vs {expect}",
                x[0]
            );
        }
    }

    #[test]
    fn zero_objective_stays_at_lower() {
        let p = QpProblem::box_only(vec![0.0; 9], vec![0.0; 3], vec![0.0; 3], vec![1.0; 3]);
        let x = solve_qp(&p, 1e-8).unwrap();
        assert_eq!(x, vec![0.0, 0.0, 0.0]);
    }
}
