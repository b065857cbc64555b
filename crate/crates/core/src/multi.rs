//! Randomized rounding for packing under several quadratic knapsack
//! constraints, with exact enumeration of the δ-heavy items.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{pick_better, Instance, ModelError, MultiInstance, Provenance, Solution};
use crate::relax::{solve_rk, RelaxError};
use crate::subsets::{count_up_to, Subsets};

/// Largest number of candidate heavy subsets the enumeration will visit.
pub const MAX_ENUMERATION: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoundingError {
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("heavy-item enumeration needs {count} subsets (limit {MAX_ENUMERATION}); increase delta")]
    EnumerationTooLarge { count: u128 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A rational in `(0, 1)`, so that heaviness is decided exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self, RoundingError> {
        if den == 0 || num == 0 || num >= den {
            return Err(RoundingError::InvalidParameter(format!(
                "delta must be a fraction in (0, 1), got {num}/{den}"
            )));
        }
        Ok(Self { num, den })
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for Ratio {
    fn default() -> Self {
        Self { num: 1, den: 4 }
    }
}

impl std::str::FromStr for Ratio {
    type Err = RoundingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RoundingError::InvalidParameter(format!("cannot parse fraction {s:?}"));
        let (a, b) = s.split_once('/').ok_or_else(bad)?;
        let num = a.trim().parse().map_err(|_| bad())?;
        let den = b.trim().parse().map_err(|_| bad())?;
        Ratio::new(num, den)
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// How the rounding probability is chosen for each draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRule {
    /// Fixed `α` for every draw.
    Fixed(f64),
    /// `α` drawn uniformly from `[0, 1]` for every draw.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundingConfig {
    pub alpha: AlphaRule,
    pub delta: Ratio,
    pub eps: f64,
    /// Upper bound on the number of draws.
    pub max_tries: usize,
    /// Number of feasible draws after which the best one is returned.
    pub keep_best_of: usize,
    pub seed: u64,
    pub stream: u64,
}

impl RoundingConfig {
    /// `α = α_δ(r, δ)`, first feasible draw out of at most 64.
    pub fn for_constraints(r: usize, seed: u64) -> Self {
        let delta = Ratio::default();
        Self {
            alpha: AlphaRule::Fixed(alpha_delta(r, delta.value())),
            delta,
            eps: 1e-6,
            max_tries: 64,
            keep_best_of: 1,
            seed,
            stream: 0,
        }
    }

    /// Uniformly random `α` per draw, best of 100 feasible draws.
    pub fn best_of_uniform(seed: u64) -> Self {
        Self {
            alpha: AlphaRule::Uniform,
            delta: Ratio::default(),
            eps: 1e-6,
            max_tries: 10_000,
            keep_best_of: 100,
            seed,
            stream: 0,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    fn validate(&self) -> Result<(), RoundingError> {
        if let AlphaRule::Fixed(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(RoundingError::InvalidParameter(format!(
                    "alpha must lie in (0, 1], got {a}"
                )));
            }
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(RoundingError::InvalidParameter(format!(
                "eps must lie in (0, 1), got {}",
                self.eps
            )));
        }
        if self.max_tries == 0 || self.keep_best_of == 0 {
            return Err(RoundingError::InvalidParameter(
                "max_tries and keep_best_of must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `α_δ = (1 − δ) / ((r + 1)[1 − δ + (1 + δ^{1/3})³])`.
pub fn alpha_delta(r: usize, delta: f64) -> f64 {
    let r = r as f64;
    let t = 1.0 + delta.cbrt();
    (1.0 - delta) / ((r + 1.0) * (1.0 - delta + t * t * t))
}

/// `f(α, δ) = α (1 − g)^r` with `g = α(1 + (1 + δ^{1/3})³) + (1 − α)δ`.
pub fn rounding_factor(r: usize, alpha: f64, delta: f64) -> f64 {
    let t = 1.0 + delta.cbrt();
    let g = alpha * (1.0 + t * t * t) + (1.0 - alpha) * delta;
    alpha * (1.0 - g).powi(r as i32)
}

/// Upper bound `r(α² + α)` on the probability that one draw is infeasible.
pub fn infeasibility_bound(r: usize, alpha: f64) -> f64 {
    r as f64 * (alpha * alpha + alpha)
}

/// `1 / (1 + 2e(r + 1))`.
pub fn enumeration_guarantee(r: usize) -> f64 {
    1.0 / (1.0 + 2.0 * std::f64::consts::E * (r as f64 + 1.0))
}

/// Ratio `f/(1 + f)` with `f = f(α_δ, δ)(1 − ε)` that enumeration plus rounding guarantees in expectation.
pub fn enumeration_ratio(r: usize, delta: f64, eps: f64) -> f64 {
    let f = rounding_factor(r, alpha_delta(r, delta), delta) * (1.0 - eps);
    f / (1.0 + f)
}

/// Largest `δ = 1/d` whose [`enumeration_ratio`] reaches [`enumeration_guarantee`].
///
/// The default `δ = 1/4` keeps the heavy enumeration small but only guarantees
/// a much smaller ratio; this is the `δ` needed for the `1/(1 + 2e(r+1))` bound.
pub fn guarantee_delta(r: usize, eps: f64) -> Ratio {
    let target = enumeration_guarantee(r);
    let mut d = 2;
    while enumeration_ratio(r, 1.0 / d as f64, eps) < target {
        d += 1;
    }
    Ratio { num: 1, den: d }
}

/// Splits items into δ-heavy (`wᵏ_ii > δcᵏ` for some `k`) and δ-light ones.
pub fn heavy_split(minst: &MultiInstance, delta: Ratio) -> (Vec<usize>, Vec<usize>) {
    (0..minst.n()).partition(|&i| {
        minst
            .constraints()
            .iter()
            .any(|k| k.w.diag(i) as u128 * delta.den as u128 > delta.num as u128 * k.c as u128)
    })
}

/// Independent coordinates with `Pr[x_i = 1] = α·y_i`; returns the selected indices.
pub fn bernoulli_round<R: Rng + ?Sized>(y: &[f64], alpha: f64, rng: &mut R) -> Vec<usize> {
    y.iter()
        .enumerate()
        .filter_map(|(i, &yi)| {
            let u: f64 = rng.gen();
            (u < alpha * yi).then_some(i)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingOutcome {
    pub solution: Solution,
    pub draws: usize,
    pub feasible_draws: usize,
    /// `true` when no feasible draw was found within `max_tries`; the solution is then empty.
    pub exhausted: bool,
    pub relax_value: f64,
}

/// Solves the relaxation and draws roundings until one (or `keep_best_of`) is feasible.
pub fn randomized_rounding(minst: &MultiInstance, config: &RoundingConfig) -> Result<RoundingOutcome, RoundingError> {
    config.validate()?;
    let relax = solve_rk(minst, config.eps)?;
    let mut rng = config.rng();
    Ok(round_point(minst, &relax.point.y, relax.value, config, &mut rng))
}

fn round_point(
    minst: &MultiInstance,
    y: &[f64],
    relax_value: f64,
    config: &RoundingConfig,
    rng: &mut ChaCha8Rng,
) -> RoundingOutcome {
    let mut best: Option<Solution> = None;
    let mut draws = 0;
    let mut feasible_draws = 0;
    while draws < config.max_tries && feasible_draws < config.keep_best_of {
        let alpha = match config.alpha {
            AlphaRule::Fixed(a) => a,
            AlphaRule::Uniform => rng.gen::<f64>(),
        };
        draws += 1;
        let sel = bernoulli_round(y, alpha, rng);
        let cand = minst.evaluate(&sel);
        if cand.feasible {
            feasible_draws += 1;
            best = pick_better(best, cand);
        }
    }
    let exhausted = best.is_none();
    let mut prov = Provenance::new("rrounding").with_seed(config.seed);
    if exhausted {
        prov = prov.with_note(format!("no feasible draw in {draws} tries"));
    }
    let solution = best.unwrap_or_else(|| minst.evaluate(&[])).with_provenance(prov);
    RoundingOutcome {
        solution,
        draws,
        feasible_draws,
        exhausted,
        relax_value,
    }
}

/// Best solution using only items in `heavy`, with at most `limit` of them, by enumeration.
fn best_heavy(minst: &MultiInstance, heavy: &[usize], limit: usize) -> Solution {
    let mut best: Option<Solution> = None;
    for s in Subsets::new(heavy.len(), limit) {
        let sel: Vec<usize> = s.iter().map(|&k| heavy[k]).collect();
        let cand = minst.evaluate(&sel);
        if cand.feasible {
            best = pick_better(best, cand);
        }
    }
    best.expect("the empty set is feasible")
}

/// Randomized rounding on the δ-light items combined with exact enumeration of the δ-heavy ones.
///
/// The heavy part considers subsets of at most `⌊r/δ⌋` heavy items; the light
/// part is rounded with `α = α_δ`. The better of the two is returned.
pub fn rr_with_enumeration(
    minst: &MultiInstance,
    delta: Ratio,
    eps: f64,
    seed: u64,
) -> Result<RoundingOutcome, RoundingError> {
    let r = minst.r();
    let (heavy, light) = heavy_split(minst, delta);
    let limit = (r as u64 * delta.den / delta.num) as usize;
    let count = count_up_to(heavy.len(), limit);
    if count > MAX_ENUMERATION {
        return Err(RoundingError::EnumerationTooLarge { count });
    }
    let heavy_best = best_heavy(minst, &heavy, limit);

    let mut config = RoundingConfig::for_constraints(r, seed);
    config.delta = delta;
    config.eps = eps;
    config.alpha = AlphaRule::Fixed(alpha_delta(r, delta.value()));
    let (sub, keep, _) = minst.reduce_fix(&heavy, &[])?;
    let mut light_out = randomized_rounding(&sub, &config)?;
    debug_assert_eq!(keep, light);
    let lifted: Vec<usize> = light_out.solution.selected.iter().map(|&k| keep[k]).collect();
    let light_sol = minst.evaluate(&lifted);

    let light_sol = if light_out.exhausted {
        minst.evaluate(&[])
    } else {
        light_sol
    };
    let best = if heavy_best.better_than(&light_sol) {
        heavy_best
    } else {
        light_sol
    };
    let mut prov = Provenance::new("rr-heavy").with_seed(seed);
    if light_out.exhausted {
        prov = prov.with_note(format!("light part: no feasible draw in {} tries", light_out.draws));
    }
    light_out.solution = best.with_provenance(prov);
    Ok(light_out)
}

/// Rounding for a single-constraint instance with partial enumeration of start sets.
///
/// For every feasible start set `U` with `|U| ≤ enum_size`, `U` is fixed at one,
/// the remaining problem is relaxed and rounded, and the best lifted solution is kept.
pub fn rounding_with_starts(
    inst: &Instance,
    enum_size: usize,
    config: &RoundingConfig,
) -> Result<Solution, RoundingError> {
    config.validate()?;
    let mut rng = config.rng();
    let mut best: Option<Solution> = None;
    for u in Subsets::new(inst.n(), enum_size) {
        if inst.weight(&u) > inst.budget() {
            continue;
        }
        let red = inst.reduce_fix(&[], &u)?;
        let sub = MultiInstance::from(&red.reduced);
        let relax = solve_rk(&sub, config.eps)?;
        let out = round_point(&sub, &relax.point.y, relax.value, config, &mut rng);
        let sel = red.lift(&out.solution.selected);
        let cand = inst.evaluate(&sel);
        if cand.feasible {
            let prov = Provenance::new("rrounding")
                .with_enum(enum_size)
                .with_start(&u)
                .with_seed(config.seed);
            best = pick_better(best, cand.with_provenance(prov));
        }
    }
    Ok(best.expect("the empty start set yields a feasible solution"))
}
