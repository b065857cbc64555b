mod common;

use common::*;
use proptest::prelude::*;
use qkpack::io::{instance_from_json, instance_to_json};
use qkpack::model::{FactorForm, Instance};

fn split(n: usize, labels: &[u8]) -> (Vec<usize>, Vec<usize>) {
    let n0 = (0..n).filter(|&i| labels[i] == 1).collect();
    let n1 = (0..n).filter(|&i| labels[i] == 2).collect();
    (n0, n1)
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn weight_matches_dense_sum(inst in arb_instance(9, 3, 6), mask in any::<u64>()) {
        let sel = mask_to_sel(mask, inst.n());
        let dense = inst.matrix().to_dense();
        prop_assert_eq!(inst.weight(&sel) as i128, dense_weight(&dense, &sel));
    }

    #[test]
    fn factor_weight_is_sum_of_squares(inst in arb_instance(9, 3, 6), mask in any::<u64>()) {
        let sel = mask_to_sel(mask, inst.n());
        let f = inst.factor().unwrap();
        let squares: u128 = f.rows().iter().map(|row| {
            let s: u128 = sel.iter().map(|&i| row[i] as u128).sum();
            s * s
        }).sum();
        prop_assert_eq!(f.weight(&sel), squares);
        prop_assert_eq!(inst.weight(&sel) as u128, squares);
    }

    #[test]
    fn marginal_identity(inst in arb_instance(9, 3, 6), mask in any::<u64>(), j in 0usize..9) {
        let n = inst.n();
        prop_assume!(n > 0);
        let j = j % n;
        let sel: Vec<usize> = mask_to_sel(mask, n).into_iter().filter(|&i| i != j).collect();
        let mut with = sel.clone();
        with.push(j);
        with.sort_unstable();
        prop_assert_eq!(inst.weight(&with) - inst.weight(&sel), inst.marginal_weight(&sel, j));
    }

    #[test]
    fn reduction_preserves_every_selection(inst in arb_instance(8, 3, 5), labels in prop::collection::vec(0u8..3, 8)) {
        let n = inst.n();
        let (n0, n1) = split(n, &labels);
        let red = match inst.reduce_fix(&n0, &n1) {
            Ok(r) => r,
            Err(_) => {
                prop_assert!(inst.weight(&n1) > inst.budget());
                return Ok(());
            }
        };
        let m = red.reduced.n();
        prop_assert_eq!(m, n - n0.len() - n1.len());
        prop_assert_eq!(red.offset, inst.value(&n1));
        for mask in 0..1u64 << m {
            let s = mask_to_sel(mask, m);
            let lifted = red.lift(&s);
            prop_assert_eq!(red.reduced.weight(&s) + red.fixed_weight, inst.weight(&lifted));
            prop_assert_eq!(red.reduced.value(&s) + red.offset, inst.value(&lifted));
            prop_assert_eq!(red.reduced.weight(&s) <= red.reduced.budget(), inst.weight(&lifted) <= inst.budget());
            prop_assert_eq!(red.project(&lifted), s);
        }
    }

    #[test]
    fn preprocess_keeps_optimum(inst in arb_instance(9, 3, 5)) {
        let pre = inst.preprocess();
        let red = &pre.reduction;
        let r = &red.reduced;
        for i in 0..r.n() {
            prop_assert!(r.profit(i) > 0);
            prop_assert!(r.diag(i) <= r.budget());
        }
        for &i in &pre.forced0 {
            prop_assert!(inst.profit(i) == 0 || inst.diag(i) > inst.budget() || red.fixed0.contains(&i));
        }
        prop_assert_eq!(naive_opt(r) + red.offset, naive_opt(&inst));
    }

    #[test]
    fn json_roundtrip(inst in arb_instance(8, 3, 9)) {
        let back = instance_from_json(&instance_to_json(&inst)).unwrap();
        prop_assert_eq!(back, inst);
    }
}

#[test]
fn factor_form_rejects_mismatched_rows() {
    assert!(FactorForm::new(3, vec![vec![1, 2]], None).is_err());
    assert!(FactorForm::new(2, vec![vec![1, 2]], Some(vec![1, 2])).is_err());
}

#[test]
fn dense_constructor_validates() {
    assert!(Instance::new(&[vec![1, 2], vec![2, 1]], vec![1, 1], 3).is_err());
    assert!(Instance::new(&[vec![1, -1], vec![-1, 1]], vec![1, 1], 3).is_err());
    assert!(Instance::new(&[vec![1, 1], vec![0, 1]], vec![1, 1], 3).is_err());
    assert!(Instance::new(&[vec![1, 1], vec![1, 1]], vec![1], 3).is_err());
    let inst = Instance::new(&[vec![2, 1], vec![1, 2]], vec![3, 4], 6).unwrap();
    assert_eq!(inst.weight(&[0, 1]), 6);
    assert!(inst.evaluate(&[0, 1]).feasible);
}
