mod common;

use common::*;
use proptest::prelude::*;
use qkpack::mechanism::{alpha, critical_payments, monotone_solve};
use qkpack::model::Instance;

fn wins(inst: &Instance, agent: usize, bid: u64) -> bool {
    let mut p = inst.profits().to_vec();
    p[agent] = bid;
    monotone_solve(&inst.with_profits(p))
        .unwrap()
        .solution
        .selected
        .contains(&agent)
}

/// Utility of `agent` with true value `value` when it bids `bid`.
fn utility(inst: &Instance, agent: usize, value: u64, bid: u64) -> i128 {
    let mut p = inst.profits().to_vec();
    p[agent] = bid;
    let out = critical_payments(&inst.with_profits(p)).unwrap();
    if out.allocation.contains(&agent) {
        value as i128 - out.payments[agent] as i128
    } else {
        0
    }
}

proptest! {
    #![proptest_config(config(60))]

    #[test]
    fn raising_a_winning_bid_keeps_winning(inst in arb_instance(7, 3, 5), raise in 1u64..40) {
        let out = monotone_solve(&inst).unwrap();
        prop_assert!(out.solution.feasible);
        for &j in &out.solution.selected {
            prop_assert!(wins(&inst, j, inst.profit(j) + raise), "agent {} lost after raising by {}", j, raise);
        }
    }

    #[test]
    fn payments_equal_scan(inst in arb_instance(6, 2, 4)) {
        let out = critical_payments(&inst).unwrap();
        for j in 0..inst.n() {
            if out.allocation.contains(&j) {
                let scan = (0..=inst.profit(j)).find(|&b| wins(&inst, j, b)).unwrap();
                prop_assert_eq!(out.payments[j], scan, "agent {}", j);
            } else {
                prop_assert_eq!(out.payments[j], 0);
            }
        }
    }

    #[test]
    fn truthful_bidding_is_optimal(inst in arb_instance(5, 2, 4), agent in 0usize..5) {
        prop_assume!(inst.n() > 0);
        let j = agent % inst.n();
        let v = inst.profit(j);
        let truthful = utility(&inst, j, v, v);
        prop_assert!(truthful >= 0);
        for bid in [0, v / 2, v.saturating_sub(1), v + 1, 2 * v + 3, 10 * v + 50] {
            prop_assert!(utility(&inst, j, v, bid) <= truthful, "bid {} beats truth {}", bid, v);
        }
    }

    #[test]
    fn ratio_floor(inst in arb_instance(9, 3, 5)) {
        let opt = naive_opt(&inst);
        let s = monotone_solve(&inst).unwrap().solution;
        prop_assert!(s.feasible);
        prop_assert!(s.value as f64 >= alpha() * opt as f64 - 1e-9, "mechanism {} OPT {}", s.value, opt);
    }
}
