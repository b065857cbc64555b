//! Greedy by profit per marginal weight, with partial enumeration of start sets.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{pick_better, Instance, Provenance, Solution};
use crate::subsets::Subsets;

pub const MAX_ENUM: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreedyError {
    #[error("start set has weight {weight} > budget {budget}")]
    InfeasibleStart { weight: u64, budget: u64 },
    #[error("enumeration size {0} exceeds {MAX_ENUM}")]
    InvalidEnumSize(usize),
    #[error("index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    Deleted,
}

/// One greedy choice; the ratio is `profit / marginal_weight` (unbounded when the weight is zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub item: usize,
    pub profit: u64,
    pub marginal_weight: u64,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub start: Vec<usize>,
    pub steps: Vec<GreedyStep>,
    pub selected: Vec<usize>,
}

/// Compares `pa/wa` with `pb/wb` exactly; a zero weight is an infinite ratio.
fn cmp_ratio(pa: u64, wa: u64, pb: u64, wb: u64) -> Ordering {
    match (wa == 0, wb == 0) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (false, false) => (pa as u128 * wb as u128).cmp(&(pb as u128 * wa as u128)),
    }
}

/// Runs the greedy from the start set `u`.
///
/// Repeatedly takes the remaining item with the best ratio of profit to
/// marginal weight (lowest index on ties); it is added if the exact weight
/// stays within budget and discarded for good otherwise.
pub fn greedy_from(inst: &Instance, u: &[usize]) -> Result<(Solution, GreedyTrace), GreedyError> {
    let n = inst.n();
    let mut start = u.to_vec();
    start.sort_unstable();
    start.dedup();
    if let Some(&index) = start.iter().find(|&&i| i >= n) {
        return Err(GreedyError::IndexOutOfRange { index, n });
    }
    let w = inst.matrix();
    let c = inst.budget();
    let mut weight = w.weight(&start);
    if weight > c {
        return Err(GreedyError::InfeasibleStart { weight, budget: c });
    }
    let p = inst.profits();
    let mut in_s = vec![false; n];
    for &i in &start {
        in_s[i] = true;
    }
    // marginal[j] = w_jj + 2 Σ_{i∈S} w_ij
    let mut marginal: Vec<u64> = (0..n).map(|j| w.marginal(&start, j)).collect();
    let mut remaining: Vec<usize> = (0..n).filter(|&j| !in_s[j]).collect();
    let mut selected = start.clone();
    let mut steps = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best = 0;
        for k in 1..remaining.len() {
            let (a, b) = (remaining[k], remaining[best]);
            if cmp_ratio(p[a], marginal[a], p[b], marginal[b]) == Ordering::Greater {
                best = k;
            }
        }
        let i = remaining.remove(best);
        let mw = marginal[i];
        let accept = weight + mw <= c;
        steps.push(GreedyStep {
            item: i,
            profit: p[i],
            marginal_weight: mw,
            decision: if accept { Decision::Accepted } else { Decision::Deleted },
        });
        if accept {
            weight += mw;
            selected.push(i);
            let row = w.row(i);
            for &j in &remaining {
                marginal[j] += 2 * row[j];
            }
        }
    }
    selected.sort_unstable();
    let sol = inst.evaluate(&selected);
    debug_assert_eq!(sol.weight(), weight);
    let trace = GreedyTrace { start, steps, selected };
    Ok((
        sol.with_provenance(Provenance::new("greedy").with_start(&trace.start)),
        trace,
    ))
}

/// Best greedy result over all feasible start sets of size at most `enum_size`.
pub fn greedy_solve(inst: &Instance, enum_size: usize) -> Result<Solution, GreedyError> {
    if enum_size > MAX_ENUM {
        return Err(GreedyError::InvalidEnumSize(enum_size));
    }
    let mut best: Option<Solution> = None;
    for u in Subsets::new(inst.n(), enum_size) {
        if inst.weight(&u) > inst.budget() {
            continue;
        }
        let (sol, _) = greedy_from(inst, &u)?;
        let prov = Provenance::new("greedy").with_enum(enum_size).with_start(&u);
        best = pick_better(best, sol.with_provenance(prov));
    }
    Ok(best.expect("the empty start set is always feasible"))
}
