//! Log-barrier interior-point method for the multi-constraint relaxation
//!
//! ```text
//! maximize   pᵀx
//! subject to xᵀWᵏx ≤ cᵏ,  (dᵏ)ᵀx ≤ cᵏ   (k = 1..r),   x ∈ [0,1]ⁿ
//! ```
//!
//! Every iterate is strictly feasible, and the central-path duality gap `m/t`
//! certifies the relative optimality gap on exit.

use nalgebra::{DMatrix, DVector};

use super::{FractionalPoint, RelaxError, RelaxSolution, RelaxStatus, Residuals};
use crate::model::MultiInstance;

const MAX_NEWTON: usize = 100_000;
const GROWTH: f64 = 8.0;

struct Barrier {
    /// Normalized matrices `Wᵏ/cᵏ` and diagonals `dᵏ/cᵏ` on the free items.
    w: Vec<DMatrix<f64>>,
    d: Vec<DVector<f64>>,
    p: DVector<f64>,
}

impl Barrier {
    /// Constraint slacks `(1 − xᵀŴx, 1 − d̂ᵀx)` per constraint, or `None` outside the domain.
    fn slacks(&self, x: &DVector<f64>) -> Option<Vec<(f64, f64, DVector<f64>)>> {
        if x.iter().any(|&v| v <= 0.0 || v >= 1.0) {
            return None;
        }
        let mut out = Vec::with_capacity(self.w.len());
        for (w, d) in self.w.iter().zip(&self.d) {
            let wx = w * x;
            let f = 1.0 - x.dot(&wx);
            let g = 1.0 - d.dot(x);
            if f <= 0.0 || g <= 0.0 {
                return None;
            }
            out.push((f, g, wx));
        }
        Some(out)
    }

    fn value(&self, t: f64, x: &DVector<f64>) -> Option<f64> {
        let s = self.slacks(x)?;
        let mut phi = -t * self.p.dot(x);
        for (f, g, _) in s {
            phi -= f.ln() + g.ln();
        }
        for &v in x.iter() {
            phi -= v.ln() + (1.0 - v).ln();
        }
        Some(phi)
    }

    fn newton(&self, t: f64, x: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
        let n = x.len();
        let s = self.slacks(x)?;
        let mut grad = -&self.p * t;
        let mut hess = DMatrix::zeros(n, n);
        for ((f, g, wx), (w, d)) in s.iter().zip(self.w.iter().zip(&self.d)) {
            grad += wx * (2.0 / f) + d / *g;
            hess += w * (2.0 / f) + (wx * wx.transpose()) * (4.0 / (f * f)) + (d * d.transpose()) / (g * g);
        }
        for i in 0..n {
            let (a, b) = (x[i], 1.0 - x[i]);
            grad[i] += -1.0 / a + 1.0 / b;
            hess[(i, i)] += 1.0 / (a * a) + 1.0 / (b * b);
        }
        let step = hess.cholesky()?.solve(&(-&grad));
        let dec = -grad.dot(&step);
        Some((step, dec))
    }
}

/// Solves the multi-constraint relaxation to relative gap `eps`.
///
/// The returned point satisfies every constraint and `pᵀy ≥ (1 − eps)·OPT`.
pub fn solve_rk(minst: &MultiInstance, eps: f64) -> Result<RelaxSolution, RelaxError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(RelaxError::InvalidEps(eps));
    }
    let n = minst.n();
    let p = minst.profits();
    let cons = minst.constraints();
    let mut y = vec![0.0; n];
    let mut fixed = vec![false; n];
    for i in 0..n {
        if p[i] == 0 {
            fixed[i] = true;
        }
    }
    let mut active_cons: Vec<usize> = Vec::new();
    for (k, con) in cons.iter().enumerate() {
        if con.c == 0 {
            for i in 0..n {
                if con.w.diag(i) > 0 {
                    fixed[i] = true;
                }
            }
        } else {
            active_cons.push(k);
        }
    }
    for i in 0..n {
        // Zero diagonal implies a zero row for a PSD matrix with non-negative entries.
        if !fixed[i] && active_cons.iter().all(|&k| cons[k].w.diag(i) == 0) {
            fixed[i] = true;
            y[i] = 1.0;
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let nf = free.len();
    let all_fit = active_cons.iter().all(|&k| cons[k].w.weight(&free) <= cons[k].c);
    if nf == 0 || active_cons.is_empty() || all_fit {
        for &i in &free {
            y[i] = 1.0;
        }
        let point = FractionalPoint::for_multi(minst, y);
        let value = point.profit(p);
        return Ok(RelaxSolution {
            point,
            value,
            q_star: None,
            status: RelaxStatus::Optimal,
            eps: 0.0,
            residuals: Residuals::default(),
        });
    }

    let pmax = free.iter().map(|&i| p[i]).max().unwrap_or(1).max(1) as f64;
    let bar = Barrier {
        w: active_cons
            .iter()
            .map(|&k| {
                let c = cons[k].c as f64;
                DMatrix::from_fn(nf, nf, |a, b| cons[k].w.get(free[a], free[b]) as f64 / c)
            })
            .collect(),
        d: active_cons
            .iter()
            .map(|&k| {
                let c = cons[k].c as f64;
                DVector::from_iterator(nf, free.iter().map(|&i| cons[k].w.diag(i) as f64 / c))
            })
            .collect(),
        p: DVector::from_iterator(nf, free.iter().map(|&i| p[i] as f64 / pmax)),
    };
    let mut s: f64 = 0.5;
    for (w, d) in bar.w.iter().zip(&bar.d) {
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            s = s.min(0.5 / total.sqrt());
        }
        let lin: f64 = d.iter().sum();
        if lin > 0.0 {
            s = s.min(0.5 / lin);
        }
    }
    let mut x = DVector::from_element(nf, s);
    let m = (2 * active_cons.len() + 2 * nf) as f64;
    let mut t = 1.0;
    let mut newton_steps = 0usize;
    loop {
        // Centering.
        loop {
            if newton_steps >= MAX_NEWTON {
                return Err(RelaxError::NoConvergence {
                    iterations: newton_steps,
                    residual: m / t,
                });
            }
            newton_steps += 1;
            let Some((step, dec)) = bar.newton(t, &x) else {
                return Err(RelaxError::Internal("barrier Hessian is not positive definite".into()));
            };
            if dec / 2.0 <= 1e-10 {
                break;
            }
            let phi0 = bar.value(t, &x).expect("iterate is interior");
            let mut a = 1.0;
            let mut moved = false;
            for _ in 0..80 {
                let cand = &x + &step * a;
                if let Some(phi) = bar.value(t, &cand) {
                    if phi <= phi0 - 0.25 * a * dec {
                        // A step below round-off cannot make further progress.
                        moved = phi < phi0 && cand != x;
                        x = cand;
                        break;
                    }
                }
                a *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let obj = bar.p.dot(&x);
        if m / t <= 0.5 * eps * obj {
            break;
        }
        t *= GROWTH;
    }

    for (k, &i) in free.iter().enumerate() {
        y[i] = x[k];
    }
    // Guard against the last ulp of round-off in the original units.
    let mut shrink: f64 = 1.0;
    for &k in &active_cons {
        let con = &cons[k];
        let c = con.c as f64;
        let quad = con.w.quad(&y);
        let lin = con.w.diag_dot(&y);
        if quad > c {
            shrink = shrink.min((c / quad).sqrt());
        }
        if lin > c {
            shrink = shrink.min(c / lin);
        }
    }
    if shrink < 1.0 {
        for &i in &free {
            y[i] *= shrink;
        }
    }
    let point = FractionalPoint::for_multi(minst, y);
    let value = point.profit(p);
    let gap = if value > 0.0 { (m / t) * pmax / value } else { 0.0 };
    Ok(RelaxSolution {
        point,
        value,
        q_star: None,
        status: RelaxStatus::EpsOptimal,
        eps: gap,
        residuals: Residuals {
            stationarity: 0.0,
            violation: 0.0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constraint, Instance, WeightMatrix};
    use crate::relax::solve_r1;

    #[test]
    fn single_constraint_matches_bisection() {
        let inst = Instance::from_matrix(WeightMatrix::diagonal(&[1, 1]), vec![1, 1], 1).unwrap();
        let r = solve_rk(&MultiInstance::from(&inst), 1e-6).unwrap();
        let exact = solve_r1(&inst).unwrap();
        assert!(r.value >= (1.0 - 1e-6) * exact.value);
        assert!(r.value <= 1.0 + 1e-9);
    }

    #[test]
    fn zero_profits_give_zero() {
        let m = MultiInstance::new(
            vec![0, 0],
            vec![Constraint {
                w: WeightMatrix::diagonal(&[1, 1]),
                c: 1,
            }],
        )
        .unwrap();
        let r = solve_rk(&m, 1e-6).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.point.y, vec![0.0, 0.0]);
    }

    #[test]
    fn duplicate_constraints() {
        let k = Constraint {
            w: WeightMatrix::diagonal(&[1, 1]),
            c: 1,
        };
        let m = MultiInstance::new(vec![1, 1], vec![k.clone(), k]).unwrap();
        let r = solve_rk(&m, 1e-6).unwrap();
        assert!(
            (r.point.y[0] - 0.5).abs() < 1e-4 && (r.point.y[1] - 0.5).abs() < 1e-4,
            "{:?}",
            r.point.y
        );
        for (q, l) in r.point.quad.iter().zip(&r.point.lin) {
            assert!(*q <= 1.0 + 1e-9 && *l <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn rejects_bad_eps() {
        let m = MultiInstance::from(&Instance::empty());
        assert!(matches!(solve_rk(&m, 0.0), Err(RelaxError::InvalidEps(_))));
    }
}
