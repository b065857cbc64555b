//! The golden-ratio algorithm: convex relaxation, λ-scaling into the
//! non-convex relaxation `v(x) = xᵀ(W−D)x + dᵀx ≤ c`, a profit-monotone
//! transform to a point with at most one fractional coordinate, and rounding
//! down, all under partial enumeration of up to three fixed items.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{pick_better, Instance, Provenance, Solution};
use crate::relax::{solve_r1, RelaxError, FEAS_SLACK};
use crate::subsets::Subsets;

/// Inverse golden ratio `(√5 − 1)/2`.
pub const PHI: f64 = 0.618_033_988_749_894_8;

/// Coordinates within `TAU` of 0 or 1 count as integral.
pub const TAU: f64 = 1e-9;

pub const MAX_ENUM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GoldenError {
    #[error("enumeration size {0} exceeds {MAX_ENUM}")]
    InvalidEnumSize(usize),
    #[error("input point violates v(x) ≤ c: v = {v}, c = {c}")]
    InfeasibleInput { v: f64, c: u64 },
    #[error("dimension mismatch: point has {got} coordinates, instance has {n}")]
    Dimension { got: usize, n: usize },
    #[error(transparent)]
    Relax(#[from] RelaxError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// First-order step `δ = ε ν_j / ν_i`.
    Basic,
    /// Step that keeps `v` exactly constant, using the cross term `w_ij`.
    Enhanced,
}

/// One move: `x_i += delta`, `x_j -= eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformStep {
    pub i: usize,
    pub j: usize,
    pub eps: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformTrace {
    pub steps: Vec<TransformStep>,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// `ν_k(x) = ∂v/∂x_k = w_kk + 2 Σ_{l≠k} w_kl x_l`.
pub fn nu(inst: &Instance, x: &[f64], k: usize) -> f64 {
    let row = inst.matrix().row(k);
    let cross: f64 = row
        .iter()
        .zip(x)
        .enumerate()
        .filter(|&(l, _)| l != k)
        .map(|(_, (&w, &xl))| w as f64 * xl)
        .sum();
    row[k] as f64 + 2.0 * cross
}

/// `v(x) = xᵀ(W−D)x + dᵀx`.
pub fn v_value(inst: &Instance, x: &[f64]) -> f64 {
    let w = inst.matrix();
    let quad = w.quad(x);
    let d2: f64 = (0..inst.n()).map(|i| w.diag(i) as f64 * x[i] * x[i]).sum();
    quad - d2 + w.diag_dot(x)
}

fn profit(inst: &Instance, x: &[f64]) -> f64 {
    x.iter().zip(inst.profits()).map(|(&x, &p)| x * p as f64).sum()
}

fn is_fractional(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

/// `r_a > r_b` with `r = p/ν`; a zero derivative ranks above everything when the profit is positive.
fn ratio(p: u64, nu: f64) -> f64 {
    if nu > 0.0 {
        p as f64 / nu
    } else if p > 0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Moves mass between fractional coordinates until at most one remains.
///
/// Each step raises the coordinate with the largest profit-to-derivative
/// ratio and lowers the one with the smallest, so the profit never drops
/// while `v` never increases (and stays constant for [`Variant::Enhanced`]).
pub fn transform_one_fractional(
    inst: &Instance,
    x: &[f64],
    variant: Variant,
) -> Result<(Vec<f64>, TransformTrace), GoldenError> {
    let n = inst.n();
    if x.len() != n {
        return Err(GoldenError::Dimension { got: x.len(), n });
    }
    let mut y: Vec<f64> = x
        .iter()
        .map(|&v| {
            if v <= TAU {
                0.0
            } else if v >= 1.0 - TAU {
                1.0
            } else {
                v
            }
        })
        .collect();
    let c = inst.budget();
    let v0 = v_value(inst, &y);
    if v0 > c as f64 * (1.0 + FEAS_SLACK) + 1e-12 {
        return Err(GoldenError::InfeasibleInput { v: v0, c });
    }
    let w = inst.matrix();
    let p = inst.profits();
    let mut nus: Vec<f64> = (0..n).map(|k| nu(inst, &y, k)).collect();
    let mut frac: Vec<usize> = (0..n).filter(|&k| is_fractional(y[k])).collect();
    let mut steps = Vec::new();
    let before = profit(inst, x);

    while frac.len() >= 2 {
        let r: Vec<f64> = frac.iter().map(|&k| ratio(p[k], nus[k])).collect();
        let mut ii = 0;
        for a in 1..frac.len() {
            if r[a] > r[ii] {
                ii = a;
            }
        }
        let mut jj = if ii == 0 { 1 } else { 0 };
        for a in 0..frac.len() {
            if a != ii && r[a] < r[jj] {
                jj = a;
            }
        }
        let (i, j) = (frac[ii], frac[jj]);
        let (xi, xj) = (y[i], y[j]);
        let (ni, nj) = (nus[i], nus[j]);
        let wij = w.get(i, j) as f64;

        let (eps, delta) = if ni <= 0.0 {
            // Raising x_i costs nothing.
            (0.0, 1.0 - xi)
        } else if nj <= 0.0 {
            (xj, 0.0)
        } else {
            match variant {
                Variant::Basic => {
                    let bar = ni / nj * (1.0 - xi);
                    let eps = xj.min(bar);
                    (eps, nj / ni * eps)
                }
                Variant::Enhanced => {
                    let bar = (1.0 - xi) * ni / (nj + 2.0 * wij * (1.0 - xi));
                    let eps = xj.min(bar);
                    (eps, eps * nj / (ni - 2.0 * wij * eps))
                }
            }
        };
        let hit_j = eps >= xj;
        let hit_i = ni <= 0.0 || !hit_j || xi + delta >= 1.0 - TAU;
        let new_i = if hit_i { 1.0 } else { xi + delta };
        let new_j = if hit_j || xj - eps <= TAU { 0.0 } else { xj - eps };
        let (di, dj) = (new_i - xi, new_j - xj);
        y[i] = new_i;
        y[j] = new_j;
        for k in 0..n {
            if k != i {
                nus[k] += 2.0 * w.get(k, i) as f64 * di;
            }
            if k != j {
                nus[k] += 2.0 * w.get(k, j) as f64 * dj;
            }
        }
        steps.push(TransformStep { i, j, eps, delta });
        frac.retain(|&k| is_fractional(y[k]));
        if steps.len() > n {
            // Every step fixes a coordinate; this is unreachable barring NaNs.
            break;
        }
    }
    let after = profit(inst, &y);
    let trace = TransformTrace {
        steps,
        input: x.to_vec(),
        output: y.clone(),
        objective_before: before,
        objective_after: after,
    };
    Ok((y, trace))
}

/// Largest `λ ∈ [φ, 1]` with `v(λy) ≤ c`, by bisection to `1e-9`.
pub fn max_feasible_scale(inst: &Instance, y: &[f64]) -> f64 {
    let w = inst.matrix();
    let lin = w.diag_dot(y);
    let off = v_value(inst, y) - lin;
    let limit = inst.budget() as f64 * (1.0 + FEAS_SLACK);
    let v = |lam: f64| lam * lam * off + lam * lin;
    if v(1.0) <= limit {
        return 1.0;
    }
    let (mut lo, mut hi) = (PHI, 1.0);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if v(mid) <= limit {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Outcome of the rounding pipeline applied to one subproblem.
fn round_subproblem(inst: &Instance) -> Result<Vec<usize>, GoldenError> {
    let relax = solve_r1(inst)?;
    let y = relax.point.y;
    let lam = max_feasible_scale(inst, &y);
    let scaled: Vec<f64> = y.iter().map(|&v| lam * v).collect();
    let (x, _) = transform_one_fractional(inst, &scaled, Variant::Enhanced)?;
    Ok((0..inst.n()).filter(|&k| x[k] >= 1.0 - TAU).collect())
}

/// Runs the golden-ratio algorithm with enumeration of up to `enum_size` fixed items.
///
/// With `enum_size = 3` the value is at least `φ·OPT` (up to relaxation tolerance).
pub fn golden_ratio_solve(inst: &Instance, enum_size: usize) -> Result<Solution, GoldenError> {
    if enum_size > MAX_ENUM {
        return Err(GoldenError::InvalidEnumSize(enum_size));
    }
    let pre = inst.preprocess();
    let base = &pre.reduction.reduced;
    let p = base.profits();
    let mut best: Option<Solution> = None;
    let mut skipped = 0usize;
    let mut first_error: Option<String> = None;
    for h in Subsets::new(base.n(), enum_size) {
        if base.weight(&h) > base.budget() {
            continue;
        }
        let n0: Vec<usize> = match h.iter().map(|&k| p[k]).min() {
            None => Vec::new(),
            Some(pmin) => (0..base.n()).filter(|&j| p[j] > pmin && !h.contains(&j)).collect(),
        };
        let red = base.reduce_fix(&n0, &h).expect("H is feasible and disjoint from N0");
        let inner = red.reduced.preprocess();
        let sel = match round_subproblem(&inner.reduction.reduced) {
            Ok(s) => s,
            Err(e) => {
                skipped += 1;
                first_error.get_or_insert_with(|| e.to_string());
                continue;
            }
        };
        let sel = pre.reduction.lift(&red.lift(&inner.reduction.lift(&sel)));
        let cand = inst.evaluate(&sel);
        if !cand.feasible {
            continue;
        }
        let start: Vec<usize> = h.iter().map(|&k| pre.reduction.index_map[k]).collect();
        let cand = cand.with_provenance(Provenance::new("golden").with_enum(enum_size).with_start(&start));
        best = pick_better(best, cand);
    }
    let mut best = best.unwrap_or_else(|| {
        inst.evaluate(&pre.forced1)
            .with_provenance(Provenance::new("golden").with_enum(enum_size))
    });
    if skipped > 0 {
        best.provenance.note = Some(format!(
            "{skipped} enumerated subproblem(s) skipped; first error: {}",
            first_error.unwrap_or_default()
        ));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WeightMatrix;

    #[test]
    fn nu_examples() {
        let d = Instance::from_matrix(WeightMatrix::diagonal(&[1, 1]), vec![1, 1], 1).unwrap();
        assert_eq!(nu(&d, &[0.3, 0.9], 0), 1.0);
        let w = Instance::new(&[vec![2, 1], vec![1, 2]], vec![1, 1], 3).unwrap();
        assert_eq!(nu(&w, &[0.5, 0.5], 0), 3.0);
        assert_eq!(nu(&w, &[0.0, 0.0], 1), 2.0);
    }

    #[test]
    fn transform_example() {
        let inst = Instance::from_matrix(WeightMatrix::diagonal(&[1, 1]), vec![2, 1], 1).unwrap();
        for variant in [Variant::Basic, Variant::Enhanced] {
            let (x, trace) = transform_one_fractional(&inst, &[0.5, 0.5], variant).unwrap();
            assert_eq!(x, vec![1.0, 0.0]);
            assert_eq!(trace.steps.len(), 1);
            let s = trace.steps[0];
            assert_eq!((s.i, s.j), (0, 1));
            assert!((s.eps - 0.5).abs() < 1e-15 && (s.delta - 0.5).abs() < 1e-15);
            assert_eq!((trace.objective_before, trace.objective_after), (1.5, 2.0));
            assert!(v_value(&inst, &x) <= 1.0);
        }
    }

    #[test]
    fn transform_leaves_near_integral_points() {
        let inst = Instance::from_matrix(WeightMatrix::diagonal(&[1, 1, 1]), vec![2, 1, 1], 2).unwrap();
        let (x, t) = transform_one_fractional(&inst, &[1.0, 0.0, 1.0], Variant::Enhanced).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 1.0]);
        assert!(t.steps.is_empty());
        let (x, t) = transform_one_fractional(&inst, &[1.0, 0.3, 0.0], Variant::Enhanced).unwrap();
        assert_eq!(x, vec![1.0, 0.3, 0.0]);
        assert!(t.steps.is_empty());
    }

    #[test]
    fn transform_rejects_infeasible_input() {
        let inst = Instance::from_matrix(WeightMatrix::diagonal(&[1, 1]), vec![1, 1], 1).unwrap();
        assert!(matches!(
            transform_one_fractional(&inst, &[0.9, 0.9], Variant::Basic),
            Err(GoldenError::InfeasibleInput { .. })
        ));
    }

    #[test]
    fn scale_examples() {
        let d = Instance::from_matrix(WeightMatrix::diagonal(&[1, 1]), vec![1, 1], 1).unwrap();
        assert_eq!(max_feasible_scale(&d, &[0.0, 0.0]), 1.0);
        assert_eq!(max_feasible_scale(&d, &[0.5, 0.5]), 1.0);
        let w = Instance::new(&[vec![1, 1], vec![1, 1]], vec![1, 1], 1).unwrap();
        // yᵀWy = 1 = c and dᵀy = 1 = c: v(λy) = λ²/2 + λ.
        let lam = max_feasible_scale(&w, &[0.5, 0.5]);
        assert!(lam >= PHI);
        assert!((lam * lam * 0.5 + lam - 1.0).abs() < 1e-8);
    }

    #[test]
    fn golden_examples() {
        let inst = Instance::from_matrix(WeightMatrix::diagonal(&[1, 1, 1]), vec![1, 1, 1], 2).unwrap();
        assert_eq!(golden_ratio_solve(&inst, 3).unwrap().value, 2);
        let one = Instance::new(&[vec![3]], vec![7], 5).unwrap();
        assert_eq!(golden_ratio_solve(&one, 0).unwrap().value, 7);
        assert!(matches!(
            golden_ratio_solve(&one, 4),
            Err(GoldenError::InvalidEnumSize(4))
        ));
    }
}
