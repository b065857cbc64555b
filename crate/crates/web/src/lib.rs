//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string; errors become
//! JavaScript exceptions. The `*_json` functions hold the logic and are
//! usable (and tested) natively.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use qkpack::golden::{golden_ratio_solve, transform_one_fractional, v_value, Variant};
use qkpack::greedy::greedy_solve;
use qkpack::instances::{gen_adversarial_greedy, gen_random_factor, rho, AdversarialParams};
use qkpack::io::instance_to_json;
use qkpack::mechanism::monotone_solve;
use qkpack::model::{Instance, Solution};
use qkpack::oracle::{branch_and_bound, brute_force};

const GRID: usize = 40;

fn row(algorithm: &str, enum_size: Option<usize>, sol: &Solution, opt: u64) -> Value {
    json!({
        "algorithm": algorithm,
        "enum_size": enum_size,
        "value": sol.value,
        "weight": sol.weight(),
        "selected": sol.selected,
        "ratio": if opt == 0 { 1.0 } else { sol.value as f64 / opt as f64 },
    })
}

/// Solves one seeded random instance with every algorithm and the exact oracle.
pub fn solve_random_json(n: usize, rank: usize, seed: u64) -> Result<Value, String> {
    let inst = gen_random_factor(n, rank, 6, seed).map_err(|e| e.to_string())?;
    let exact = if n <= 20 {
        brute_force(&inst)
    } else {
        branch_and_bound(&inst)
    }
    .map_err(|e| e.to_string())?;
    let opt = exact.value;
    let mut rows = Vec::new();
    for k in 0..=2 {
        let sol = greedy_solve(&inst, k).map_err(|e| e.to_string())?;
        rows.push(row("greedy", Some(k), &sol, opt));
    }
    for k in 0..=1 {
        let sol = golden_ratio_solve(&inst, k).map_err(|e| e.to_string())?;
        rows.push(row("golden", Some(k), &sol, opt));
    }
    let mono = monotone_solve(&inst).map_err(|e| e.to_string())?;
    rows.push(row("monotone", None, &mono.solution, opt));
    rows.push(row("exact", None, &exact, opt));
    let instance: Value = serde_json::from_str(&instance_to_json(&inst)).map_err(|e| e.to_string())?;
    Ok(json!({ "instance": instance, "budget": inst.budget(), "results": rows }))
}

/// Plain greedy on the hard family for `ℓ = 1..k`, next to `ρ(ℓ/k)`.
pub fn adversarial_curve_json(m: usize, k: u64) -> Result<Value, String> {
    let mut points = Vec::new();
    for l in 1..k {
        let params = AdversarialParams { m, k, l };
        let adv = gen_adversarial_greedy(params).map_err(|e| e.to_string())?;
        let sol = greedy_solve(&adv.instance, 0).map_err(|e| e.to_string())?;
        points.push(json!({
            "l": l,
            "q": params.q(),
            "ratio": sol.value as f64 / adv.opt_value as f64,
            "rho": rho(params.q()),
            "integral": adv.integral_count,
        }));
    }
    Ok(json!({ "m": m, "k": k, "points": points }))
}

/// Both transform variants on a two-item instance from the point `(x1, x2)`.
///
/// The budget is set to `⌈v(x)⌉` so the start point is feasible. `grid` holds
/// `v` on a `(GRID+1)²` lattice of the unit square, row index = `x2`.
#[allow(clippy::too_many_arguments)]
pub fn transform_demo_json(w11: u64, w12: u64, w22: u64, p1: u64, p2: u64, x1: f64, x2: f64) -> Result<Value, String> {
    let w = vec![vec![w11 as i64, w12 as i64], vec![w12 as i64, w22 as i64]];
    let probe = Instance::new(&w, vec![p1, p2], u64::MAX / 4).map_err(|e| e.to_string())?;
    let x = [x1.clamp(0.0, 1.0), x2.clamp(0.0, 1.0)];
    let c = v_value(&probe, &x).ceil().max(0.0) as u64;
    let inst = Instance::new(&w, vec![p1, p2], c).map_err(|e| e.to_string())?;
    let mut variants = serde_json::Map::new();
    for (name, variant) in [("basic", Variant::Basic), ("enhanced", Variant::Enhanced)] {
        let (y, trace) = transform_one_fractional(&inst, &x, variant).map_err(|e| e.to_string())?;
        variants.insert(
            name.into(),
            json!({
                "output": y,
                "v_after": v_value(&inst, &y),
                "profit_before": trace.objective_before,
                "profit_after": trace.objective_after,
                "steps": trace.steps,
            }),
        );
    }
    let grid: Vec<Vec<f64>> = (0..=GRID)
        .map(|b| {
            (0..=GRID)
                .map(|a| v_value(&inst, &[a as f64 / GRID as f64, b as f64 / GRID as f64]))
                .collect()
        })
        .collect();
    Ok(json!({
        "budget": c,
        "v_before": v_value(&inst, &x),
        "start": x,
        "variants": variants,
        "grid": grid,
    }))
}

fn export(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn solve_random(n: usize, rank: usize, seed: u32) -> Result<String, JsError> {
    export(solve_random_json(n, rank, seed as u64))
}

#[wasm_bindgen]
pub fn adversarial_curve(m: usize, k: u32) -> Result<String, JsError> {
    export(adversarial_curve_json(m, k as u64))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn transform_demo(w11: u32, w12: u32, w22: u32, p1: u32, p2: u32, x1: f64, x2: f64) -> Result<String, JsError> {
    export(transform_demo_json(
        w11 as u64, w12 as u64, w22 as u64, p1 as u64, p2 as u64, x1, x2,
    ))
}
