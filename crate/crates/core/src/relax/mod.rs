//! Convex relaxations.
//!
//! * [`solve_dq`] — minimum quadratic weight for a profit target,
//!   `min xᵀWx s.t. pᵀx ≥ q, dᵀx ≤ c, x ∈ [0,1]ⁿ`.
//! * [`solve_r1`] — `max ⌊pᵀx⌋ s.t. xᵀWx ≤ c, dᵀx ≤ c, x ∈ [0,1]ⁿ`, solved
//!   exactly in the integer objective by bisection over `q`.
//! * [`solve_rk`] — the `r`-constraint analogue, solved to a relative gap.

pub mod barrier;
pub mod qp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, MultiInstance};
pub use barrier::solve_rk;
use qp::{Qp, QpError};

/// Relative slack when comparing a floating-point weight against an integer budget.
pub const FEAS_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxError {
    #[error("relaxation solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("relaxation gap must lie in (0, 1), got {0}")]
    InvalidEps(f64),
    #[error("internal solver error: {0}")]
    Internal(String),
}

impl From<QpError> for RelaxError {
    fn from(e: QpError) -> Self {
        match e {
            QpError::NoConvergence { iterations, residual } => RelaxError::NoConvergence { iterations, residual },
            other => RelaxError::Internal(other.to_string()),
        }
    }
}

/// A point of `[0,1]ⁿ` with its constraint values, one entry per constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalPoint {
    pub y: Vec<f64>,
    /// `yᵀWᵏy` for each constraint.
    pub quad: Vec<f64>,
    /// `(dᵏ)ᵀy` for each constraint.
    pub lin: Vec<f64>,
}

impl FractionalPoint {
    pub fn for_instance(inst: &Instance, mut y: Vec<f64>) -> Self {
        clamp_unit(&mut y);
        let w = inst.matrix();
        Self {
            quad: vec![w.quad(&y)],
            lin: vec![w.diag_dot(&y)],
            y,
        }
    }

    pub fn for_multi(minst: &MultiInstance, mut y: Vec<f64>) -> Self {
        clamp_unit(&mut y);
        let cs = minst.constraints();
        Self {
            quad: cs.iter().map(|k| k.w.quad(&y)).collect(),
            lin: cs.iter().map(|k| k.w.diag_dot(&y)).collect(),
            y,
        }
    }

    pub fn profit(&self, p: &[u64]) -> f64 {
        self.y.iter().zip(p).map(|(&y, &p)| y * p as f64).sum()
    }
}

fn clamp_unit(y: &mut [f64]) {
    for v in y.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxStatus {
    Optimal,
    EpsOptimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub stationarity: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxSolution {
    pub point: FractionalPoint,
    /// Objective value: the integer `q*` for the single-constraint relaxation.
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_star: Option<u64>,
    pub status: RelaxStatus,
    pub eps: f64,
    pub residuals: Residuals,
}

/// Maximizes `pᵀx` over `dᵀx ≤ c, x ∈ [0,1]ⁿ` (fractional knapsack).
/// Returns the optimal value and a maximizer.
pub fn fractional_knapsack(p: &[u64], d: &[u64], c: u64) -> (f64, Vec<f64>) {
    let n = p.len();
    let mut x = vec![0.0; n];
    let mut value = 0.0;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        if p[i] == 0 {
            continue;
        }
        if d[i] == 0 {
            x[i] = 1.0;
            value += p[i] as f64;
        } else {
            order.push(i);
        }
    }
    // Descending p_i/d_i, exact comparison.
    order.sort_by(|&a, &b| {
        let lhs = p[a] as u128 * d[b] as u128;
        let rhs = p[b] as u128 * d[a] as u128;
        rhs.cmp(&lhs).then(a.cmp(&b))
    });
    let mut room = c;
    for i in order {
        if room == 0 {
            break;
        }
        if d[i] <= room {
            x[i] = 1.0;
            room -= d[i];
            value += p[i] as f64;
        } else {
            let f = room as f64 / d[i] as f64;
            x[i] = f;
            value += f * p[i] as f64;
            room = 0;
        }
    }
    (value, x)
}

/// Result of a single `(D_q)` solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DqSolution {
    pub point: FractionalPoint,
    /// `min xᵀWx`.
    pub objective: f64,
    pub residuals: Residuals,
}

/// Solves `min xᵀWx s.t. pᵀx ≥ q, dᵀx ≤ c, x ∈ [0,1]ⁿ`.
///
/// Returns `Ok(None)` when the target `q` is unreachable under the linear constraints.
pub fn solve_dq(inst: &Instance, q: u64) -> Result<Option<DqSolution>, RelaxError> {
    let n = inst.n();
    let p = inst.profits();
    let d = inst.matrix().diagonal_vec();
    let c = inst.budget();
    if q == 0 {
        let point = FractionalPoint::for_instance(inst, vec![0.0; n]);
        return Ok(Some(DqSolution {
            point,
            objective: 0.0,
            residuals: Residuals::default(),
        }));
    }
    let (lp_max, x_lp) = fractional_knapsack(p, &d, c);
    let qf = q as f64;
    if qf > lp_max * (1.0 + 1e-12) {
        return Ok(None);
    }
    let scale_t = (qf / lp_max).min(1.0);
    let x0: Vec<f64> = x_lp.iter().map(|&v| v * scale_t).collect();

    let w = inst.matrix();
    let wscale = (0..n).flat_map(|i| w.row(i).iter().copied()).max().unwrap_or(0).max(1) as f64;
    let pmax = p.iter().copied().max().unwrap_or(0).max(1) as f64;
    let hessian = DMatrix::from_fn(n, n, |i, j| 2.0 * w.get(i, j) as f64 / wscale);
    let mut upper = vec![1.0; n];
    let mut rows: Vec<Vec<f64>> = vec![p.iter().map(|&v| v as f64 / pmax).collect()];
    let mut b = vec![qf / pmax];
    if c == 0 {
        for i in 0..n {
            if d[i] > 0 {
                upper[i] = 0.0;
            }
        }
    } else {
        rows.push(d.iter().map(|&v| -(v as f64) / c as f64).collect());
        b.push(-1.0);
    }
    let problem = Qp {
        hessian: Some(hessian),
        linear: DVector::zeros(n),
        lower: vec![0.0; n],
        upper,
        a: DMatrix::from_fn(rows.len(), n, |r, col| rows[r][col]),
        b: DVector::from_vec(b),
        max_iter: qp::DEFAULT_MAX_ITER,
    };
    // x0 meets the target exactly up to rounding; allow that much.
    let x0: Vec<f64> = x0.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let sol = match problem.solve(&x0, 1e-9) {
        Ok(s) => s,
        Err(QpError::InfeasibleStart(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let point = FractionalPoint::for_instance(inst, sol.x);
    Ok(Some(DqSolution {
        objective: point.quad[0],
        point,
        residuals: Residuals {
            stationarity: sol.stationarity * wscale,
            violation: sol.violation,
        },
    }))
}

/// Solves the single-constraint relaxation exactly in its integer objective.
///
/// `q*` is the largest integer target whose minimum quadratic weight is at most
/// `c·(1 + 1e-9)`; the returned point is the corresponding minimizer.
pub fn solve_r1(inst: &Instance) -> Result<RelaxSolution, RelaxError> {
    let n = inst.n();
    let c = inst.budget();
    let total = inst.total_profit();
    let all: Vec<usize> = (0..n).collect();
    if n == 0 || inst.weight(&all) <= c {
        let point = FractionalPoint::for_instance(inst, vec![1.0; n]);
        return Ok(RelaxSolution {
            point,
            value: total as f64,
            q_star: Some(total),
            status: RelaxStatus::Optimal,
            eps: 0.0,
            residuals: Residuals::default(),
        });
    }
    let d = inst.matrix().diagonal_vec();
    let (lp_max, _) = fractional_knapsack(inst.profits(), &d, c);
    let mut hi = ((lp_max * (1.0 + 1e-12)).floor() as u64).min(total);
    let mut lo = 0u64;
    let limit = c as f64 * (1.0 + FEAS_SLACK);
    let mut best = solve_dq(inst, 0)?.expect("zero target is always reachable");
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        match solve_dq(inst, mid)? {
            Some(s) if s.objective <= limit => {
                lo = mid;
                best = s;
            }
            _ => hi = mid - 1,
        }
    }
    Ok(RelaxSolution {
        point: best.point,
        value: lo as f64,
        q_star: Some(lo),
        status: RelaxStatus::Optimal,
        eps: 0.0,
        residuals: best.residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WeightMatrix;

    fn diag_inst(d: &[u64], p: &[u64], c: u64) -> Instance {
        Instance::from_matrix(WeightMatrix::diagonal(d), p.to_vec(), c).unwrap()
    }

    #[test]
    fn dq_examples() {
        let inst = diag_inst(&[1, 1], &[1, 1], 1);
        let s = solve_dq(&inst, 1).unwrap().unwrap();
        assert!((s.point.y[0] - 0.5).abs() < 1e-9 && (s.point.y[1] - 0.5).abs() < 1e-9);
        assert!((s.objective - 0.5).abs() < 1e-9);
        let s = solve_dq(&inst, 0).unwrap().unwrap();
        assert_eq!(s.objective, 0.0);
        assert!(solve_dq(&inst, 2).unwrap().is_none());
    }

    #[test]
    fn r1_examples() {
        let inst = diag_inst(&[1, 1], &[1, 1], 1);
        let r = solve_r1(&inst).unwrap();
        assert_eq!(r.q_star, Some(1));
        assert!((r.point.y[0] - 0.5).abs() < 1e-9);
        assert!(r.point.quad[0] <= 1.0 + 1e-9 && r.point.lin[0] <= 1.0 + 1e-9);

        let inst = Instance::new(&[vec![1, 1], vec![1, 1]], vec![3, 4], 4).unwrap();
        let r = solve_r1(&inst).unwrap();
        assert_eq!(r.q_star, Some(7));
        assert_eq!(r.point.y, vec![1.0, 1.0]);

        let r = solve_r1(&Instance::empty()).unwrap();
        assert_eq!(r.q_star, Some(0));
    }

    #[test]
    fn fractional_knapsack_prefers_density() {
        let (v, x) = fractional_knapsack(&[6, 5, 5], &[5, 4, 4], 8);
        assert!((v - 10.0).abs() < 1e-12);
        assert_eq!(x, vec![0.0, 1.0, 1.0]);
        let (v, x) = fractional_knapsack(&[4, 1], &[2, 0], 1);
        assert!((v - 3.0).abs() < 1e-12);
        assert_eq!(x, vec![0.5, 1.0]);
    }
}
