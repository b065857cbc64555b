//! Primal active-set method for small dense convex quadratic programs
//!
//! ```text
//! minimize   ½ xᵀGx + gᵀx
//! subject to l ≤ x ≤ u,   A x ≥ b
//! ```
//!
//! `G` may be singular (or absent, giving a linear program). The method needs a
//! feasible starting point and keeps a linearly independent working set of
//! active bounds and rows. Steps are taken in the null space of the working
//! set: along a zero-curvature descent direction when one exists, otherwise
//! the (pseudo-inverse) Newton step, with a ratio test against inactive
//! constraints.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("no convergence after {iterations} active-set iterations (stationarity residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("starting point violates the constraints by {0:e}")]
    InfeasibleStart(f64),
    #[error("problem data have inconsistent dimensions")]
    Dimension,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BoundState {
    Free,
    Lower,
    Upper,
    Fixed,
}

/// Problem data. Rows of `a` are the constraints `a_r·x ≥ b_r`.
#[derive(Debug, Clone)]
pub struct Qp {
    pub hessian: Option<DMatrix<f64>>,
    pub linear: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Multipliers of the rows `A x ≥ b` (zero for rows outside the final working set).
    pub row_multipliers: Vec<f64>,
    /// `‖∇f − Aᵀλ − μ‖_∞` at the returned point.
    pub stationarity: f64,
    /// Largest constraint violation at the returned point.
    pub violation: f64,
}

const ZERO_STEP: f64 = 1e-15;
const CYCLE_GUARD: usize = 50;

impl Qp {
    pub fn n(&self) -> usize {
        self.linear.len()
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        let lin = self.linear.dot(x);
        match &self.hessian {
            Some(g) => 0.5 * x.dot(&(g * x)) + lin,
            None => lin,
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.hessian {
            Some(g) => g * x + &self.linear,
            None => self.linear.clone(),
        }
    }

    fn violation(&self, x: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        for i in 0..self.n() {
            v = v.max(self.lower[i] - x[i]).max(x[i] - self.upper[i]);
        }
        if self.a.nrows() > 0 {
            let ax = &self.a * x;
            for r in 0..self.a.nrows() {
                v = v.max(self.b[r] - ax[r]);
            }
        }
        v
    }

    /// Runs the active-set method from the feasible point `x0`.
    ///
    /// Points violating a constraint by at most `start_tol` are accepted and
    /// treated as lying on that constraint.
    pub fn solve(&self, x0: &[f64], start_tol: f64) -> Result<QpSolution, QpError> {
        let n = self.n();
        let m = self.a.nrows();
        if x0.len() != n
            || self.lower.len() != n
            || self.upper.len() != n
            || self.a.ncols() != n
            || self.b.len() != m
            || self.hessian.as_ref().is_some_and(|g| g.nrows() != n || g.ncols() != n)
        {
            return Err(QpError::Dimension);
        }
        let mut x = DVector::from_column_slice(x0);
        let v = self.violation(&x);
        if v > start_tol {
            return Err(QpError::InfeasibleStart(v));
        }

        let xscale = 1.0;
        let tol_x = 1e-13 * xscale;
        let mut state = vec![BoundState::Free; n];
        for i in 0..n {
            if self.upper[i] - self.lower[i] <= 0.0 {
                state[i] = BoundState::Fixed;
                x[i] = self.lower[i];
            } else if x[i] <= self.lower[i] + tol_x {
                state[i] = BoundState::Lower;
                x[i] = self.lower[i];
            } else if x[i] >= self.upper[i] - tol_x {
                state[i] = BoundState::Upper;
                x[i] = self.upper[i];
            }
        }
        let row_norm: Vec<f64> = (0..m).map(|r| self.a.row(r).norm().max(1e-300)).collect();
        let mut work: Vec<usize> = Vec::new();
        let mut in_work = vec![false; m];
        let mut zero_steps = 0usize;

        for iter in 0..self.max_iter {
            let bland = zero_steps > CYCLE_GUARD;
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == BoundState::Free).collect();
            let nf = free.len();
            let grad = self.gradient(&x);
            let g_f = DVector::from_iterator(nf, free.iter().map(|&i| grad[i]));
            let a_w = DMatrix::from_fn(work.len(), nf, |r, c| self.a[(work[r], free[c])]);
            let proj = Projector::new(&a_w);

            let r = proj.apply(&g_f);
            let d_f = match &self.hessian {
                None => -r,
                Some(g) => {
                    let g_ff = DMatrix::from_fn(nf, nf, |i, j| g[(free[i], free[j])]);
                    let d = proj.direction(&g_ff, &r, &g_f);
                    proj.apply(&d)
                }
            };

            let dnorm = d_f.amax();
            if dnorm <= 1e-12 {
                let lam = proj.multipliers(&a_w, &g_f);
                let mut worst: Option<(f64, Drop)> = None;
                let mut consider = |val: f64, what: Drop| {
                    if val < -1e-10 {
                        let better = match &worst {
                            None => true,
                            Some((w, _)) => !bland && val < *w,
                        };
                        if better {
                            worst = Some((val, what));
                        }
                    }
                };
                for (k, &row) in work.iter().enumerate() {
                    consider(lam[k], Drop::Row(k, row));
                }
                let at = self.multiplied_rows(&work, &lam);
                for i in 0..n {
                    let mu = grad[i] - at[i];
                    match state[i] {
                        BoundState::Lower => consider(mu, Drop::Bound(i)),
                        BoundState::Upper => consider(-mu, Drop::Bound(i)),
                        _ => {}
                    }
                }
                match worst {
                    None => return Ok(self.finish(x, iter, &work, &lam, &state)),
                    Some((_, Drop::Row(k, row))) => {
                        work.remove(k);
                        in_work[row] = false;
                    }
                    Some((_, Drop::Bound(i))) => state[i] = BoundState::Free,
                }
                continue;
            }

            // Exact minimizer along the ray; infinite when the curvature vanishes.
            let mut step = f64::INFINITY;
            if let Some(g) = &self.hessian {
                let mut d_full = DVector::zeros(n);
                for (k, &i) in free.iter().enumerate() {
                    d_full[i] = d_f[k];
                }
                let curv = d_full.dot(&(g * &d_full));
                let slope = g_f.dot(&d_f);
                if curv > 1e-14 * d_f.norm_squared() {
                    step = -slope / curv;
                }
            }
            let eps_d = 1e-12 * dnorm;
            let mut block: Option<Block> = None;
            let mut take = |ratio: f64, what: Block, step: &mut f64, ties_ok: bool| {
                if ratio < *step || (ties_ok && ratio == *step && block.is_none()) {
                    *step = ratio;
                    block = Some(what);
                }
            };
            for (k, &i) in free.iter().enumerate() {
                let di = d_f[k];
                if di < -eps_d {
                    let ratio = ((self.lower[i] - x[i]) / di).max(0.0);
                    take(ratio, Block::Lower(i), &mut step, false);
                } else if di > eps_d {
                    let ratio = ((self.upper[i] - x[i]) / di).max(0.0);
                    take(ratio, Block::Upper(i), &mut step, false);
                }
            }
            for row in 0..m {
                if in_work[row] {
                    continue;
                }
                let ad: f64 = free.iter().enumerate().map(|(k, &i)| self.a[(row, i)] * d_f[k]).sum();
                if ad < -eps_d * row_norm[row] {
                    let slack: f64 = self.a.row(row).dot(&x.transpose()) - self.b[row];
                    let ratio = slack.max(0.0) / -ad;
                    take(ratio, Block::Row(row), &mut step, false);
                }
            }
            if !step.is_finite() {
                return Err(QpError::NoConvergence {
                    iterations: iter,
                    residual: f64::INFINITY,
                });
            }
            for (k, &i) in free.iter().enumerate() {
                x[i] += step * d_f[k];
            }
            if step * dnorm <= ZERO_STEP {
                zero_steps += 1;
            } else {
                zero_steps = 0;
            }
            match block {
                Some(Block::Lower(i)) => {
                    state[i] = BoundState::Lower;
                    x[i] = self.lower[i];
                }
                Some(Block::Upper(i)) => {
                    state[i] = BoundState::Upper;
                    x[i] = self.upper[i];
                }
                Some(Block::Row(row)) => {
                    work.push(row);
                    in_work[row] = true;
                }
                None => {}
            }
            // Keep free coordinates inside their box against round-off.
            for &i in &free {
                x[i] = x[i].clamp(self.lower[i], self.upper[i]);
            }
        }
        let lam = DVector::zeros(work.len());
        let sol = self.finish(x, self.max_iter, &work, &lam, &state);
        Err(QpError::NoConvergence {
            iterations: self.max_iter,
            residual: sol.stationarity,
        })
    }

    fn multiplied_rows(&self, work: &[usize], lam: &DVector<f64>) -> DVector<f64> {
        let mut at = DVector::zeros(self.n());
        for (k, &row) in work.iter().enumerate() {
            at += self.a.row(row).transpose() * lam[k];
        }
        at
    }

    fn finish(
        &self,
        x: DVector<f64>,
        iterations: usize,
        work: &[usize],
        lam: &DVector<f64>,
        state: &[BoundState],
    ) -> QpSolution {
        let grad = self.gradient(&x);
        let at = self.multiplied_rows(work, lam);
        let mut stationarity: f64 = 0.0;
        for i in 0..self.n() {
            let resid = grad[i] - at[i];
            let r = match state[i] {
                BoundState::Free => resid.abs(),
                BoundState::Lower => (-resid).max(0.0),
                BoundState::Upper => resid.max(0.0),
                BoundState::Fixed => 0.0,
            };
            stationarity = stationarity.max(r);
        }
        let mut row_multipliers = vec![0.0; self.a.nrows()];
        for (k, &row) in work.iter().enumerate() {
            row_multipliers[row] = lam[k];
        }
        QpSolution {
            objective: self.objective(&x),
            violation: self.violation(&x).max(0.0),
            x: x.iter().copied().collect(),
            iterations,
            row_multipliers,
            stationarity,
        }
    }
}

enum Drop {
    Row(usize, usize),
    Bound(usize),
}

enum Block {
    Lower(usize),
    Upper(usize),
    Row(usize),
}

/// Orthogonal projector onto the null space of the working rows.
struct Projector {
    /// `A_W` and the inverse Gram matrix `(A_W A_Wᵀ)⁻¹` (pseudo-inverse when singular).
    a: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
}

impl Projector {
    fn new(a_w: &DMatrix<f64>) -> Self {
        let gram = a_w * a_w.transpose();
        let k = gram.nrows();
        let gram_inv = if k == 0 {
            DMatrix::zeros(0, 0)
        } else {
            match gram.clone().cholesky() {
                Some(ch) => ch.inverse(),
                None => {
                    let tol = 1e-12 * gram.amax().max(1e-300);
                    gram.pseudo_inverse(tol).unwrap_or_else(|_| DMatrix::zeros(k, k))
                }
            }
        };
        Self {
            a: a_w.clone(),
            gram_inv,
        }
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.a.nrows() == 0 {
            return v.clone();
        }
        let coef = &self.gram_inv * (&self.a * v);
        v - self.a.transpose() * coef
    }

    fn multipliers(&self, _a_w: &DMatrix<f64>, g_f: &DVector<f64>) -> DVector<f64> {
        if self.a.nrows() == 0 {
            return DVector::zeros(0);
        }
        &self.gram_inv * (&self.a * g_f)
    }

    /// Minimizes `½ dᵀGd + gᵀd` over the null space, given the projected gradient `r`.
    ///
    /// Returns a zero-curvature descent direction if the projected gradient has
    /// a component in the kernel of the projected Hessian, otherwise the
    /// pseudo-inverse Newton step.
    fn direction(&self, g_ff: &DMatrix<f64>, r: &DVector<f64>, g_f: &DVector<f64>) -> DVector<f64> {
        let nf = r.len();
        if nf == 0 {
            return DVector::zeros(0);
        }
        let mut pg = DMatrix::zeros(nf, nf);
        for j in 0..nf {
            let col = self.apply(&g_ff.column(j).into_owned());
            pg.set_column(j, &col);
        }
        let pgp_t = {
            let mut m = DMatrix::zeros(nf, nf);
            for i in 0..nf {
                let row = self.apply(&pg.row(i).transpose());
                m.set_row(i, &row.transpose());
            }
            m
        };
        let sym = (&pgp_t + pgp_t.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let lmax = eig.eigenvalues.amax().max(1e-300);
        let tol = 1e-10 * lmax.max(1.0);
        let coords = eig.eigenvectors.transpose() * r;
        let mut kernel = DVector::zeros(nf);
        let mut newton = DVector::zeros(nf);
        for k in 0..nf {
            let v = eig.eigenvectors.column(k);
            if eig.eigenvalues[k] <= tol {
                kernel += v * coords[k];
            } else {
                newton -= v * (coords[k] / eig.eigenvalues[k]);
            }
        }
        let kernel = self.apply(&kernel);
        if kernel.amax() > 1e-11 * (1.0 + g_f.amax()) {
            -kernel
        } else {
            newton
        }
    }
}
