//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use proptest::prelude::*;
use qkpack::model::{FactorForm, Instance, MultiInstance};

/// `Σ_{i,j∈S} w_ij` straight from the dense matrix, in `i128`.
pub fn dense_weight(w: &[Vec<i64>], sel: &[usize]) -> i128 {
    let mut s = 0i128;
    for &i in sel {
        for &j in sel {
            s += w[i][j] as i128;
        }
    }
    s
}

pub fn mask_to_sel(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Optimal value by plain enumeration over the dense matrix.
pub fn naive_opt(inst: &Instance) -> u64 {
    let n = inst.n();
    assert!(n <= 20);
    let w = inst.matrix().to_dense();
    let p = inst.profits();
    let c = inst.budget() as i128;
    let mut best = 0;
    for mask in 0..1u64 << n {
        let sel = mask_to_sel(mask, n);
        if dense_weight(&w, &sel) <= c {
            best = best.max(sel.iter().map(|&i| p[i]).sum());
        }
    }
    best
}

pub fn naive_opt_multi(m: &MultiInstance) -> u64 {
    let n = m.n();
    assert!(n <= 20);
    let ws: Vec<_> = m.constraints().iter().map(|k| (k.w.to_dense(), k.c as i128)).collect();
    let mut best = 0;
    for mask in 0..1u64 << n {
        let sel = mask_to_sel(mask, n);
        if ws.iter().all(|(w, c)| dense_weight(w, &sel) <= *c) {
            best = best.max(sel.iter().map(|&i| m.profits()[i]).sum());
        }
    }
    best
}

/// Factor-form instances with explicit entries, zero columns and zero profits allowed.
pub fn arb_instance(max_n: usize, max_rank: usize, max_entry: u64) -> impl Strategy<Value = Instance> {
    (0..=max_n, 1..=max_rank)
        .prop_flat_map(move |(n, rank)| {
            (
                prop::collection::vec(prop::collection::vec(0..=max_entry, n), rank),
                prop::collection::vec(0u64..=60, n),
                0.0f64..=1.0,
            )
        })
        .prop_map(|(rows, p, frac)| {
            let n = p.len();
            let f = FactorForm::new(n, rows, None).unwrap();
            let total = f.to_matrix().unwrap().total() as f64;
            let c = (frac * total).round() as u64;
            Instance::from_factor(f, p, c).unwrap()
        })
}

/// Like [`arb_instance`] but with strictly positive profits and `max_i w_ii ≤ c`.
pub fn arb_proper_instance(max_n: usize, max_rank: usize, max_entry: u64) -> impl Strategy<Value = Instance> {
    arb_instance(max_n, max_rank, max_entry).prop_map(|inst| {
        let p: Vec<u64> = inst.profits().iter().map(|&x| x + 1).collect();
        let dmax = (0..inst.n()).map(|i| inst.diag(i)).max().unwrap_or(0);
        let c = inst.budget().max(dmax);
        let w = inst.matrix().clone();
        Instance::from_matrix(w, p, c).unwrap()
    })
}

/// `v(x) = Σ_{i≠j} w_ij x_i x_j + Σ_i w_ii x_i`.
pub fn v_naive(w: &[Vec<i64>], x: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += if i == j {
                w[i][i] as f64 * x[i]
            } else {
                w[i][j] as f64 * x[i] * x[j]
            };
        }
    }
    s
}

pub fn count_fractional(x: &[f64]) -> usize {
    x.iter().filter(|&&v| v > 1e-9 && v < 1.0 - 1e-9).count()
}

/// Test configuration without regression files in the source tree.
pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}
