//! Monotone allocation rule and critical-bid payments.
//!
//! The allocation either awards the single highest bidder (when that bid is a
//! large enough fraction of the relaxation value) or runs the plain greedy
//! from the empty set. Both branches are monotone in each agent's own bid, so
//! charging every winner the smallest bid at which it would still win makes
//! truthful bidding a dominant strategy.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::greedy::greedy_from;
use crate::model::{Instance, Provenance, Solution};
use crate::relax::{solve_r1, RelaxError};

/// `(1 − √3/e) / (1 + 4/(√5 − 1))`.
pub fn alpha() -> f64 {
    let greedy = 1.0 - 3f64.sqrt() / std::f64::consts::E;
    greedy / (1.0 + 4.0 / (5f64.sqrt() - 1.0))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error("allocation is not monotone for agent {agent}: wins at bid {wins_at} but loses at bid {loses_at}")]
    MonotonicityViolation { agent: usize, wins_at: u64, loses_at: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Singleton,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneOutcome {
    pub solution: Solution,
    pub branch: Branch,
    /// Integer value `q*` of the relaxation used by the threshold test.
    pub relax_value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub allocation: Vec<usize>,
    pub payments: Vec<u64>,
    pub branch: Branch,
    pub relax_value: u64,
}

/// The allocation rule, with bids taken as the instance's profits.
///
/// Items that cannot fit alone never win; items with a zero row always win.
/// Neither influences the other agents' outcome.
pub fn monotone_solve(inst: &Instance) -> Result<MonotoneOutcome, MechanismError> {
    let n = inst.n();
    let c = inst.budget();
    let never: Vec<usize> = (0..n).filter(|&i| inst.diag(i) > c).collect();
    let always: Vec<usize> = (0..n).filter(|&i| inst.diag(i) == 0).collect();
    let red = inst
        .reduce_fix(&never, &always)
        .expect("zero rows weigh nothing and the sets are disjoint");
    let sub = &red.reduced;
    let q_star = solve_r1(sub)?
        .q_star
        .expect("single-constraint relaxation has an integer value");
    let p = sub.profits();
    let top = (0..sub.n()).fold(None, |best: Option<usize>, i| match best {
        Some(b) if p[b] >= p[i] => Some(b),
        _ => Some(i),
    });
    let (local, branch) = match top {
        Some(i) if p[i] as f64 >= alpha() * q_star as f64 => (vec![i], Branch::Singleton),
        _ => {
            let (sol, _) = greedy_from(sub, &[]).expect("empty start is feasible");
            (sol.selected, Branch::Greedy)
        }
    };
    let selected = red.lift(&local);
    let tag = match branch {
        Branch::Singleton => "monotone/singleton",
        Branch::Greedy => "monotone/greedy",
    };
    let solution = inst.evaluate(&selected).with_provenance(Provenance::new(tag));
    Ok(MonotoneOutcome {
        solution,
        branch,
        relax_value: q_star,
    })
}

struct Probe<'a> {
    inst: &'a Instance,
    agent: usize,
    cache: HashMap<u64, bool>,
}

impl Probe<'_> {
    fn wins(&mut self, bid: u64) -> Result<bool, MechanismError> {
        if let Some(&w) = self.cache.get(&bid) {
            return Ok(w);
        }
        let mut p = self.inst.profits().to_vec();
        p[self.agent] = bid;
        let out = monotone_solve(&self.inst.with_profits(p))?;
        let w = out.solution.selected.binary_search(&self.agent).is_ok();
        self.cache.insert(bid, w);
        Ok(w)
    }
}

/// Smallest integer bid in `[0, bid]` at which `agent` still wins, by binary search.
fn critical_bid(inst: &Instance, agent: usize) -> Result<u64, MechanismError> {
    let bid = inst.profit(agent);
    let mut probe = Probe {
        inst,
        agent,
        cache: HashMap::from([(bid, true)]),
    };
    if probe.wins(0)? {
        return Ok(0);
    }
    let (mut lo, mut hi) = (0u64, bid);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if probe.wins(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if hi < bid && !probe.wins(hi + 1)? {
        return Err(MechanismError::MonotonicityViolation {
            agent,
            wins_at: hi,
            loses_at: hi + 1,
        });
    }
    Ok(hi)
}

/// Allocation plus critical payments; losers pay nothing.
pub fn critical_payments(inst: &Instance) -> Result<AuctionOutcome, MechanismError> {
    let out = monotone_solve(inst)?;
    let mut payments = vec![0u64; inst.n()];
    for &j in &out.solution.selected {
        if inst.diag(j) > 0 {
            payments[j] = critical_bid(inst, j)?;
        }
    }
    Ok(AuctionOutcome {
        allocation: out.solution.selected,
        payments,
        branch: out.branch,
        relax_value: out.relax_value,
    })
}
