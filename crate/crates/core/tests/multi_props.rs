mod common;

use common::*;
use proptest::prelude::*;
use qkpack::instances::gen_random_multi;
use qkpack::model::MultiInstance;
use qkpack::multi::{
    alpha_delta, heavy_split, randomized_rounding, rounding_factor, rounding_with_starts, rr_with_enumeration,
    AlphaRule, Ratio, RoundingConfig,
};
use qkpack::oracle::{brute_force, brute_force_multi};

fn arb_multi() -> impl Strategy<Value = MultiInstance> {
    (1usize..10, 1usize..4, 1usize..4, any::<u64>())
        .prop_map(|(n, r, rank, seed)| gen_random_multi(n, r, rank, 5, seed).unwrap())
}

fn exactly_feasible(m: &MultiInstance, sel: &[usize]) -> bool {
    m.constraints()
        .iter()
        .all(|k| dense_weight(&k.w.to_dense(), sel) <= k.c as i128)
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn rounding_is_feasible_and_deterministic(m in arb_multi(), seed in any::<u64>()) {
        let cfg = RoundingConfig::for_constraints(m.r(), seed);
        let a = randomized_rounding(&m, &cfg).unwrap();
        let b = randomized_rounding(&m, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.solution.feasible);
        prop_assert!(exactly_feasible(&m, &a.solution.selected));
        prop_assert_eq!(a.exhausted, a.feasible_draws == 0);
        let best_of = randomized_rounding(&m, &RoundingConfig::best_of_uniform(seed)).unwrap();
        prop_assert!(exactly_feasible(&m, &best_of.solution.selected));
    }

    #[test]
    fn heavy_enumeration_is_feasible(m in arb_multi(), seed in any::<u64>()) {
        let out = rr_with_enumeration(&m, Ratio::default(), 1e-6, seed).unwrap();
        prop_assert!(out.solution.feasible);
        prop_assert!(exactly_feasible(&m, &out.solution.selected));
        // With every item heavy the enumeration alone is exact.
        let opt = naive_opt_multi(&m);
        let (heavy, _) = heavy_split(&m, Ratio::default());
        if heavy.len() == m.n() {
            prop_assert_eq!(out.solution.value, opt);
        }
        prop_assert!(out.solution.value <= opt);
    }

    #[test]
    fn feasible_sets_hold_few_heavy_items(m in arb_multi(), num in 1u64..5) {
        // Each heavy item alone takes more than δcᵏ of one of the r budgets.
        let delta = Ratio::new(num, 5).unwrap();
        let (heavy, _) = heavy_split(&m, delta);
        let best = brute_force_multi(&m).unwrap();
        let limit = m.r() as u64 * delta.den / delta.num;
        let count = best.selected.iter().filter(|i| heavy.contains(i)).count() as u64;
        prop_assert!(count <= limit, "{} heavy items, limit {}", count, limit);
        for mask in 0..1u64 << m.n() {
            let sel = mask_to_sel(mask, m.n());
            if exactly_feasible(&m, &sel) {
                let c = sel.iter().filter(|i| heavy.contains(i)).count() as u64;
                prop_assert!(c <= limit);
            }
        }
    }

    #[test]
    fn single_constraint_multi_matches_single(inst in arb_instance(10, 3, 5)) {
        let m = MultiInstance::from(&inst);
        prop_assert_eq!(brute_force_multi(&m).unwrap().value, brute_force(&inst).unwrap().value);
        let s = rounding_with_starts(&inst, 1, &RoundingConfig::for_constraints(1, 3)).unwrap();
        prop_assert!(s.feasible && inst.weight(&s.selected) <= inst.budget());
    }

    #[test]
    fn alpha_delta_decreases(r in 1usize..8, a in 0.0f64..0.99, b in 0.0f64..0.99) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(alpha_delta(r, lo) >= alpha_delta(r, hi));
        prop_assert!(alpha_delta(r, lo) > alpha_delta(r + 1, lo));
        prop_assert!(alpha_delta(r, lo) * (alpha_delta(r, lo) + 1.0) * r as f64 <= 0.5);
    }
}

#[test]
fn rounding_factor_limit() {
    for r in 1..6 {
        let rf = r as f64;
        let limit = 1.0 / (2.0 * (rf + 1.0)) * (rf / (rf + 1.0)).powi(r as i32);
        let small = 1e-12;
        let f = rounding_factor(r, alpha_delta(r, small), small);
        assert!((f - limit).abs() < 1e-3, "r={r}: {f} vs {limit}");
        assert!(limit >= 1.0 / (2.0 * std::f64::consts::E * (rf + 1.0)));
    }
}

#[test]
fn invalid_configs() {
    let m = gen_random_multi(3, 1, 1, 3, 0).unwrap();
    let mut cfg = RoundingConfig::for_constraints(1, 0);
    cfg.alpha = AlphaRule::Fixed(0.0);
    assert!(randomized_rounding(&m, &cfg).is_err());
    let mut cfg = RoundingConfig::for_constraints(1, 0);
    cfg.max_tries = 0;
    assert!(randomized_rounding(&m, &cfg).is_err());
}
