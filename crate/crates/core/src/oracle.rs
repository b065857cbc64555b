//! Exact optima: exhaustive enumeration and a depth-first branch-and-bound.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::greedy::greedy_solve;
use crate::model::{Instance, MultiInstance, Provenance, Solution, WeightMatrix};
use crate::relax::fractional_knapsack;
use crate::relax::qp::{Qp, DEFAULT_MAX_ITER};

pub const BRUTE_MAX_N: usize = 25;
pub const DEFAULT_NODE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("exhaustive search supports at most {max} items, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error("node limit {nodes} reached; incumbent {} with upper bound {bound}", incumbent.value)]
    NodeLimit {
        incumbent: Box<Solution>,
        bound: u64,
        nodes: u64,
    },
}

/// `x` is lexicographically smaller than `y`, both read as sorted index sequences.
fn lex_less(x: u64, y: u64) -> bool {
    let d = x ^ y;
    if d == 0 {
        return false;
    }
    let i = d.trailing_zeros();
    let above = if i >= 63 { 0 } else { !((2u64 << i) - 1) };
    if x >> i & 1 == 1 {
        y & above != 0
    } else {
        x & above == 0
    }
}

fn mask_to_vec(mask: u64) -> Vec<usize> {
    (0..64).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Gray-code walk over the low `low` bits with the items in `high` always selected.
fn walk(p: &[u64], cons: &[(&WeightMatrix, u64)], low: usize, high: u64) -> Option<(u64, u64)> {
    let n = p.len();
    let r = cons.len();
    let mut mask = high;
    let mut value: u64 = 0;
    let mut weight = vec![0u64; r];
    // cross[k][i] = Σ_{l∈S} wᵏ_il
    let mut cross = vec![vec![0u64; n]; r];
    let add = |j: usize, cross: &mut [Vec<u64>], weight: &mut [u64]| {
        for (k, (w, _)) in cons.iter().enumerate() {
            weight[k] += 2 * cross[k][j] + w.diag(j);
            for (i, &wij) in w.row(j).iter().enumerate() {
                cross[k][i] += wij;
            }
        }
    };
    let remove = |j: usize, cross: &mut [Vec<u64>], weight: &mut [u64]| {
        for (k, (w, _)) in cons.iter().enumerate() {
            for (i, &wij) in w.row(j).iter().enumerate() {
                cross[k][i] -= wij;
            }
            weight[k] -= 2 * cross[k][j] + w.diag(j);
        }
    };
    for j in low..n {
        if high >> j & 1 == 1 {
            add(j, &mut cross, &mut weight);
            value += p[j];
        }
    }
    let fits = |weight: &[u64]| weight.iter().zip(cons).all(|(&w, (_, c))| w <= *c);
    let mut best = fits(&weight).then_some((value, mask));
    for g in 1u64..(1u64 << low) {
        let j = g.trailing_zeros() as usize;
        if mask >> j & 1 == 1 {
            remove(j, &mut cross, &mut weight);
            value -= p[j];
        } else {
            add(j, &mut cross, &mut weight);
            value += p[j];
        }
        mask ^= 1 << j;
        if fits(&weight) {
            best = better(best, (value, mask));
        }
    }
    best
}

fn better(best: Option<(u64, u64)>, cand: (u64, u64)) -> Option<(u64, u64)> {
    match best {
        Some(b) if b.0 > cand.0 || (b.0 == cand.0 && !lex_less(cand.1, b.1)) => Some(b),
        _ => Some(cand),
    }
}

fn brute(p: &[u64], cons: &[(&WeightMatrix, u64)]) -> Result<(u64, Vec<usize>), OracleError> {
    let n = p.len();
    if n > BRUTE_MAX_N {
        return Err(OracleError::TooLarge { n, max: BRUTE_MAX_N });
    }
    let shard_bits = if n >= 16 { 6.min(n) } else { 0 };
    let low = n - shard_bits;
    let shards = 0..(1u64 << shard_bits);
    #[cfg(feature = "parallel")]
    let results: Vec<Option<(u64, u64)>> = {
        use rayon::prelude::*;
        shards.into_par_iter().map(|h| walk(p, cons, low, h << low)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Option<(u64, u64)>> = shards.map(|h| walk(p, cons, low, h << low)).collect();
    let (value, mask) = results
        .into_iter()
        .flatten()
        .fold(None, better)
        .expect("the empty set is feasible");
    Ok((value, mask_to_vec(mask)))
}

/// Exact optimum by enumerating all subsets; ties go to the lexicographically smallest selection.
pub fn brute_force(inst: &Instance) -> Result<Solution, OracleError> {
    let (_, sel) = brute(inst.profits(), &[(inst.matrix(), inst.budget())])?;
    Ok(inst.evaluate(&sel).with_provenance(Provenance::new("brute_force")))
}

/// Exact optimum of a multi-constraint instance by enumeration.
pub fn brute_force_multi(minst: &MultiInstance) -> Result<Solution, OracleError> {
    let cons: Vec<(&WeightMatrix, u64)> = minst.constraints().iter().map(|k| (&k.w, k.c)).collect();
    let (_, sel) = brute(minst.profits(), &cons)?;
    Ok(minst.evaluate(&sel).with_provenance(Provenance::new("brute_force")))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BnbStats {
    pub nodes: u64,
    pub lp_solves: u64,
    pub lp_failures: u64,
    /// Incumbent value after each improvement, starting with the initial heuristic.
    pub incumbents: Vec<u64>,
}

/// Upper bound on `pᵀx` at a node from the linearized problem
///
/// ```text
/// z_i ≥ Σ_j w_ij (x_i + x_j − 1),  z ≥ 0,  Σ z_i ≤ c,  x ∈ [0,1]ⁿ
/// ```
///
/// with fixed variables substituted. The linearization is exact on binary
/// points because `W` is entrywise non-negative. Returns the LP value over the
/// free items and their LP values, or `None` if the LP solver fails.
pub fn linearized_bound(inst: &Instance, ones: &[usize], free: &[usize]) -> Option<(f64, Vec<f64>)> {
    let w = inst.matrix();
    let nf = free.len();
    let rows_items: Vec<usize> = ones.iter().chain(free).copied().collect();
    let nz = rows_items.len();
    let nv = nf + nz;
    let c = inst.budget() as f64;
    let row_sum: Vec<u64> = (0..inst.n()).map(|i| w.row(i).iter().sum()).collect();
    let scale = row_sum.iter().copied().max().unwrap_or(0).max(inst.budget()).max(1) as f64;
    let pmax = free.iter().map(|&i| inst.profit(i)).max().unwrap_or(0).max(1) as f64;

    let mut a = DMatrix::zeros(nz + 1, nv);
    let mut b = DVector::zeros(nz + 1);
    let mut upper = vec![1.0; nv];
    let mut x0 = vec![0.0; nv];
    for (r, &i) in rows_items.iter().enumerate() {
        let zi = nf + r;
        let fixed_part: u64 = ones.iter().map(|&j| w.get(i, j)).sum();
        a[(r, zi)] = 1.0;
        let is_free = r >= ones.len();
        for (k, &j) in free.iter().enumerate() {
            let mut coef = w.get(i, j) as f64;
            if is_free && j == i {
                coef += row_sum[i] as f64;
            }
            a[(r, k)] = -coef / scale;
        }
        let rhs = if is_free {
            fixed_part as f64 - row_sum[i] as f64
        } else {
            fixed_part as f64
        };
        b[r] = rhs / scale;
        upper[zi] = (2 * row_sum[i]) as f64 / scale;
        x0[zi] = rhs.max(0.0) / scale;
        a[(nz, zi)] = -1.0;
    }
    b[nz] = -c / scale;
    let mut linear = DVector::zeros(nv);
    for (k, &j) in free.iter().enumerate() {
        linear[k] = -(inst.profit(j) as f64) / pmax;
    }
    let qp = Qp {
        hessian: None,
        linear,
        lower: vec![0.0; nv],
        upper,
        a,
        b,
        max_iter: DEFAULT_MAX_ITER,
    };
    let sol = qp.solve(&x0, 1e-9).ok()?;
    Some((-sol.objective * pmax, sol.x[..nf].to_vec()))
}

fn round_bound(v: f64) -> u64 {
    (v + 1e-7 * v.abs().max(1.0)).floor().max(0.0) as u64
}

/// Exact optimum by depth-first branch-and-bound with the default node limit.
pub fn branch_and_bound(inst: &Instance) -> Result<Solution, OracleError> {
    branch_and_bound_with(inst, DEFAULT_NODE_LIMIT).map(|(s, _)| s)
}

/// Branch-and-bound with an explicit node limit.
///
/// Each node is bounded first by a fractional knapsack on the reduced
/// diagonals and, if that fails to prune, by the linearized LP. Branching
/// uses the LP variable closest to ½, exploring `x = 1` first.
pub fn branch_and_bound_with(inst: &Instance, node_limit: u64) -> Result<(Solution, BnbStats), OracleError> {
    let n = inst.n();
    let w = inst.matrix();
    let c = inst.budget();
    let p = inst.profits();
    let mut stats = BnbStats::default();
    let mut best = greedy_solve(inst, 0).expect("enumeration size 0 is valid");
    stats.incumbents.push(best.value);
    let consider = |cand: Solution, best: &mut Solution, stats: &mut BnbStats| {
        if cand.feasible && cand.better_than(best) {
            *best = cand;
            stats.incumbents.push(best.value);
        }
    };

    // Node state: 0 = free, 1 = fixed at one, 2 = fixed at zero.
    let mut stack: Vec<Vec<u8>> = vec![vec![0; n]];
    let mut root_bound = u64::MAX;
    while let Some(state) = stack.pop() {
        stats.nodes += 1;
        if stats.nodes > node_limit {
            return Err(OracleError::NodeLimit {
                incumbent: Box::new(best.with_provenance(Provenance::new("branch_and_bound"))),
                bound: root_bound,
                nodes: node_limit,
            });
        }
        let ones: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        let fixed_w = w.weight(&ones);
        let room = c - fixed_w;
        let offset: u64 = ones.iter().map(|&i| p[i]).sum();
        let reduced_diag = |i: usize| w.diag(i) + 2 * ones.iter().map(|&k| w.get(i, k)).sum::<u64>();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0 && reduced_diag(i) <= room).collect();

        let mut all: Vec<usize> = ones.iter().chain(&free).copied().collect();
        all.sort_unstable();
        if free.is_empty() || w.weight(&all) <= c {
            consider(inst.evaluate(&all), &mut best, &mut stats);
            continue;
        }
        let fp: Vec<u64> = free.iter().map(|&i| p[i]).collect();
        let fd: Vec<u64> = free.iter().map(|&i| reduced_diag(i)).collect();
        let (knap, knap_x) = fractional_knapsack(&fp, &fd, room);
        let mut bound = round_bound(offset as f64 + knap);
        if stats.nodes == 1 {
            root_bound = bound;
        }
        if bound <= best.value {
            continue;
        }
        stats.lp_solves += 1;
        let lp = linearized_bound(inst, &ones, &free);
        let lp_ok = lp.is_some();
        let frac_x = match lp {
            Some((v, x)) => {
                bound = bound.min(round_bound(offset as f64 + v));
                x
            }
            None => {
                stats.lp_failures += 1;
                knap_x
            }
        };
        if stats.nodes == 1 {
            root_bound = bound;
        }
        if bound <= best.value {
            continue;
        }
        let integral = frac_x.iter().all(|&v| !(1e-9..=1.0 - 1e-9).contains(&v));
        if integral && lp_ok {
            let mut sel = ones.clone();
            sel.extend(free.iter().zip(&frac_x).filter(|(_, &v)| v > 0.5).map(|(&i, _)| i));
            let cand = inst.evaluate(&sel);
            if cand.feasible && bound <= cand.value {
                consider(cand, &mut best, &mut stats);
                continue;
            }
            consider(cand, &mut best, &mut stats);
        }
        let pick = (0..free.len())
            .min_by(|&a, &b| (frac_x[a] - 0.5).abs().total_cmp(&(frac_x[b] - 0.5).abs()))
            .expect("free is non-empty");
        let var = free[pick];
        let mut child = state.clone();
        for i in 0..n {
            if state[i] == 0 && !free.contains(&i) {
                child[i] = 2;
            }
        }
        let mut zero = child.clone();
        zero[var] = 2;
        stack.push(zero);
        // reduced_diag(var) ≤ room, so fixing it at one stays feasible.
        child[var] = 1;
        stack.push(child);
    }
    let best = best.with_provenance(Provenance::new("branch_and_bound"));
    Ok((best, stats))
}
