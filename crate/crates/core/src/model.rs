//! Instance representation, exact weight evaluation and variable fixing.
//!
//! An [`Instance`] is a single packing problem `max pᵀx s.t. xᵀWx ≤ c, x ∈ {0,1}ⁿ`
//! with a symmetric, entrywise non-negative, positive semi-definite integer
//! matrix `W`. Every feasibility decision on a binary vector goes through the
//! integer routines here; floating point is only used by the relaxations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard ceiling on `Σ_ij w_ij` (and on `Σ_i p_i`) accepted at validation.
pub const OVERFLOW_LIMIT: u128 = 1 << 62;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("matrix is not square: {rows} rows, row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("dimension mismatch: matrix is {matrix}×{matrix}, profit vector has {profits} entries")]
    DimensionMismatch { matrix: usize, profits: usize },
    #[error("matrix is not symmetric: w[{i}][{j}] = {a} but w[{j}][{i}] = {b}")]
    AsymmetricMatrix { i: usize, j: usize, a: i64, b: i64 },
    #[error("negative entry {value} at ({i}, {j})")]
    NegativeEntry { i: usize, j: usize, value: i64 },
    #[error("matrix is not positive semi-definite (pivot {pivot:e} at step {step})")]
    NotPsd { step: usize, pivot: f64 },
    #[error("entry sum exceeds 2^62")]
    Overflow,
    #[error("fixed sets overlap at index {0}")]
    OverlappingFix(usize),
    #[error("index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("fixing the set at one is infeasible: weight {weight} > budget {budget}")]
    InfeasibleFixing { weight: u64, budget: u64 },
    #[error("multi-constraint instance needs between 1 and {max} constraints, got {got}")]
    ConstraintCount { got: usize, max: usize },
}

/// Dense symmetric non-negative integer matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightMatrix {
    n: usize,
    data: Vec<u64>,
}

impl WeightMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0; n * n],
        }
    }

    /// Diagonal matrix; used mostly in tests and examples.
    pub fn diagonal(d: &[u64]) -> Self {
        let mut w = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            w.data[i * w.n + i] = v;
        }
        w
    }

    /// Validates a raw square matrix: shape, symmetry, sign, overflow and PSD.
    pub fn from_dense(rows: &[Vec<i64>]) -> Result<Self, ModelError> {
        let w = Self::from_dense_unchecked_psd(rows)?;
        check_psd(&w)?;
        Ok(w)
    }

    /// Same as [`from_dense`](Self::from_dense) minus the PSD factorization.
    /// Used for matrices that are PSD by construction.
    pub(crate) fn from_dense_unchecked_psd(rows: &[Vec<i64>]) -> Result<Self, ModelError> {
        let n = rows.len();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(ModelError::NotSquare {
                    rows: n,
                    row,
                    len: r.len(),
                });
            }
        }
        let mut total: u128 = 0;
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let a = rows[i][j];
                if a < 0 {
                    return Err(ModelError::NegativeEntry { i, j, value: a });
                }
                if j > i && rows[j][i] != a {
                    return Err(ModelError::AsymmetricMatrix { i, j, a, b: rows[j][i] });
                }
                total += a as u128;
                if total >= OVERFLOW_LIMIT {
                    return Err(ModelError::Overflow);
                }
                data.push(a as u64);
            }
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn diag(&self, i: usize) -> u64 {
        self.data[i * self.n + i]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn diagonal_vec(&self) -> Vec<u64> {
        (0..self.n).map(|i| self.diag(i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<i64>> {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|&v| v as i64).collect())
            .collect()
    }

    /// `χ_Sᵀ W χ_S` in exact integer arithmetic.
    pub fn weight(&self, sel: &[usize]) -> u64 {
        let mut acc: u128 = 0;
        for &i in sel {
            let row = self.row(i);
            for &j in sel {
                acc += row[j] as u128;
            }
        }
        acc as u64
    }

    /// `w(S ∪ {j}) − w(S) = w_jj + 2 Σ_{i∈S} w_ij`, for `j ∉ S`.
    pub fn marginal(&self, sel: &[usize], j: usize) -> u64 {
        let row = self.row(j);
        let cross: u64 = sel.iter().map(|&i| row[i]).sum();
        row[j] + 2 * cross
    }

    /// `Σ_i Σ_j w_ij` as a u128.
    pub fn total(&self) -> u128 {
        self.data.iter().map(|&v| v as u128).sum()
    }

    pub fn max_row_sum(&self) -> u64 {
        (0..self.n).map(|i| self.row(i).iter().sum::<u64>()).max().unwrap_or(0)
    }

    /// `xᵀ W x` in floating point.
    pub fn quad(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            if x[i] == 0.0 {
                continue;
            }
            let row = self.row(i);
            let mut s = 0.0;
            for j in 0..self.n {
                s += row[j] as f64 * x[j];
            }
            acc += x[i] * s;
        }
        acc
    }

    /// `dᵀ x` for the diagonal `d` of this matrix.
    pub fn diag_dot(&self, x: &[f64]) -> f64 {
        (0..self.n).map(|i| self.diag(i) as f64 * x[i]).sum()
    }

    /// Principal submatrix on `keep` with `2 Σ_{k∈fixed1} w_ik` added to the diagonal.
    pub(crate) fn reduce(&self, keep: &[usize], fixed1: &[usize]) -> Self {
        let m = keep.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in keep {
            let row = self.row(i);
            let shift: u64 = fixed1.iter().map(|&k| row[k]).sum();
            for &j in keep {
                if i == j {
                    data.push(row[j] + 2 * shift);
                } else {
                    data.push(row[j]);
                }
            }
        }
        Self { n: m, data }
    }
}

/// Pivoted symmetric factorization in double precision.
///
/// Pivots are taken on the largest remaining diagonal entry. A pivot below
/// `-1e-8·max(1, max_i w_ii)` rejects the matrix; once every remaining pivot
/// is within tolerance of zero, the remaining Schur complement must vanish.
pub fn check_psd(w: &WeightMatrix) -> Result<(), ModelError> {
    let n = w.n();
    let scale = (0..n).map(|i| w.diag(i)).max().unwrap_or(0).max(1) as f64;
    let tol = 1e-8 * scale;
    let mut a: Vec<f64> = w.data.iter().map(|&v| v as f64).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut step = 0;
    while !active.is_empty() {
        let (pos, &piv_idx) = active
            .iter()
            .enumerate()
            .max_by(|x, y| a[x.1 * n + x.1].total_cmp(&a[y.1 * n + y.1]))
            .unwrap();
        let pivot = a[piv_idx * n + piv_idx];
        if pivot < -tol {
            return Err(ModelError::NotPsd { step, pivot });
        }
        if pivot <= tol {
            for &i in &active {
                for &j in &active {
                    if i != j && a[i * n + j].abs() > tol {
                        return Err(ModelError::NotPsd {
                            step,
                            pivot: -a[i * n + j].abs(),
                        });
                    }
                }
            }
            return Ok(());
        }
        active.swap_remove(pos);
        for &i in &active {
            let f = a[i * n + piv_idx] / pivot;
            if f == 0.0 {
                continue;
            }
            for &j in &active {
                a[i * n + j] -= f * a[piv_idx * n + j];
            }
        }
        step += 1;
    }
    Ok(())
}

/// `W = Σ_e β_e u_e u_eᵀ` with integer rows `u_e` and optional integer row
/// multipliers `β_e` (all ones when absent).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorForm {
    n: usize,
    rows: Vec<Vec<u64>>,
    row_weights: Option<Vec<u64>>,
}

impl FactorForm {
    pub fn new(n: usize, rows: Vec<Vec<u64>>, row_weights: Option<Vec<u64>>) -> Result<Self, ModelError> {
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(ModelError::NotSquare {
                    rows: n,
                    row,
                    len: r.len(),
                });
            }
        }
        if let Some(b) = &row_weights {
            if b.len() != rows.len() {
                return Err(ModelError::DimensionMismatch {
                    matrix: rows.len(),
                    profits: b.len(),
                });
            }
        }
        Ok(Self { n, rows, row_weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn row_weights(&self) -> Option<&[u64]> {
        self.row_weights.as_deref()
    }

    fn beta(&self, e: usize) -> u128 {
        self.row_weights.as_ref().map_or(1, |b| b[e] as u128)
    }

    /// Materializes `W`, rejecting overflow.
    pub fn to_matrix(&self) -> Result<WeightMatrix, ModelError> {
        let n = self.n;
        let mut acc = vec![0u128; n * n];
        for (e, row) in self.rows.iter().enumerate() {
            let beta = self.beta(e);
            if beta == 0 {
                continue;
            }
            let support: Vec<usize> = (0..n).filter(|&j| row[j] != 0).collect();
            for &i in &support {
                for &j in &support {
                    let v = beta
                        .checked_mul(row[i] as u128)
                        .and_then(|v| v.checked_mul(row[j] as u128))
                        .ok_or(ModelError::Overflow)?;
                    acc[i * n + j] = acc[i * n + j].checked_add(v).ok_or(ModelError::Overflow)?;
                }
            }
        }
        let total: u128 = acc.iter().fold(0u128, |s, &v| s.saturating_add(v));
        if total >= OVERFLOW_LIMIT {
            return Err(ModelError::Overflow);
        }
        Ok(WeightMatrix {
            n,
            data: acc.into_iter().map(|v| v as u64).collect(),
        })
    }

    /// `Σ_e β_e (u_eᵀ χ_S)²`, independent of the dense matrix.
    pub fn weight(&self, sel: &[usize]) -> u128 {
        self.rows
            .iter()
            .enumerate()
            .map(|(e, row)| {
                let s: u128 = sel.iter().map(|&j| row[j] as u128).sum();
                self.beta(e) * s * s
            })
            .sum()
    }
}

/// Bookkeeping attached to every [`Solution`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enum_size: Option<usize>,
    /// Enumerated start set that produced this solution.
    #[serde(default)]
    pub start: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Provenance {
    pub fn new(algorithm: &str) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            ..Default::default()
        }
    }

    pub fn with_enum(mut self, k: usize) -> Self {
        self.enum_size = Some(k);
        self
    }

    pub fn with_start(mut self, start: &[usize]) -> Self {
        self.start = start.to_vec();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// A binary selection with exact value and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Sorted, zero-based item indices.
    pub selected: Vec<usize>,
    pub value: u64,
    /// One exact weight per constraint.
    pub weights: Vec<u64>,
    pub feasible: bool,
    pub provenance: Provenance,
}

impl Solution {
    /// Weight in the first (for single-constraint instances, the only) constraint.
    pub fn weight(&self) -> u64 {
        self.weights.first().copied().unwrap_or(0)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// `true` if `self` is better than `other`: higher value, ties broken by the
    /// lexicographically smaller selection.
    pub fn better_than(&self, other: &Solution) -> bool {
        self.value > other.value || (self.value == other.value && self.selected < other.selected)
    }
}

/// Keeps the better of two candidates under [`Solution::better_than`].
pub fn pick_better(best: Option<Solution>, cand: Solution) -> Option<Solution> {
    match best {
        Some(b) if !cand.better_than(&b) => Some(b),
        _ => Some(cand),
    }
}

fn normalize(sel: &[usize], n: usize) -> Result<Vec<usize>, ModelError> {
    let mut s = sel.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&last) = s.last() {
        if last >= n {
            return Err(ModelError::IndexOutOfRange { index: last, n });
        }
    }
    Ok(s)
}

fn sum_profits(p: &[u64]) -> Result<(), ModelError> {
    let total: u128 = p.iter().map(|&v| v as u128).sum();
    if total >= OVERFLOW_LIMIT {
        Err(ModelError::Overflow)
    } else {
        Ok(())
    }
}

/// One quadratic knapsack instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    p: Vec<u64>,
    w: WeightMatrix,
    c: u64,
    factor: Option<FactorForm>,
}

impl Instance {
    /// Validates a dense matrix including the PSD test.
    pub fn new(w: &[Vec<i64>], p: Vec<u64>, c: u64) -> Result<Self, ModelError> {
        let w = WeightMatrix::from_dense(w)?;
        Self::from_matrix(w, p, c)
    }

    /// Wraps an already validated matrix.
    pub fn from_matrix(w: WeightMatrix, p: Vec<u64>, c: u64) -> Result<Self, ModelError> {
        if w.n() != p.len() {
            return Err(ModelError::DimensionMismatch {
                matrix: w.n(),
                profits: p.len(),
            });
        }
        sum_profits(&p)?;
        Ok(Self { p, w, c, factor: None })
    }

    /// Factor-form input: PSD and non-negative by construction.
    pub fn from_factor(f: FactorForm, p: Vec<u64>, c: u64) -> Result<Self, ModelError> {
        let w = f.to_matrix()?;
        let mut inst = Self::from_matrix(w, p, c)?;
        inst.factor = Some(f);
        Ok(inst)
    }

    pub fn empty() -> Self {
        Self {
            p: Vec::new(),
            w: WeightMatrix::zeros(0),
            c: 0,
            factor: None,
        }
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn profits(&self) -> &[u64] {
        &self.p
    }

    pub fn profit(&self, i: usize) -> u64 {
        self.p[i]
    }

    pub fn matrix(&self) -> &WeightMatrix {
        &self.w
    }

    pub fn budget(&self) -> u64 {
        self.c
    }

    pub fn factor(&self) -> Option<&FactorForm> {
        self.factor.as_ref()
    }

    pub fn diag(&self, i: usize) -> u64 {
        self.w.diag(i)
    }

    pub fn total_profit(&self) -> u64 {
        self.p.iter().sum()
    }

    pub fn value(&self, sel: &[usize]) -> u64 {
        sel.iter().map(|&i| self.p[i]).sum()
    }

    pub fn weight(&self, sel: &[usize]) -> u64 {
        self.w.weight(sel)
    }

    pub fn marginal_weight(&self, sel: &[usize], j: usize) -> u64 {
        self.w.marginal(sel, j)
    }

    /// Same instance with a different profit vector (bids in the mechanism).
    pub fn with_profits(&self, p: Vec<u64>) -> Self {
        assert_eq!(p.len(), self.n());
        Self {
            p,
            w: self.w.clone(),
            c: self.c,
            factor: self.factor.clone(),
        }
    }

    /// Builds a [`Solution`]; indices are sorted and deduplicated.
    ///
    /// # Panics
    /// If an index is out of range.
    pub fn evaluate(&self, sel: &[usize]) -> Solution {
        let selected = normalize(sel, self.n()).expect("selection index out of range");
        let weight = self.w.weight(&selected);
        Solution {
            value: self.value(&selected),
            weights: vec![weight],
            feasible: weight <= self.c,
            selected,
            provenance: Provenance::default(),
        }
    }

    /// Fixes `n0` at zero and `n1` at one and returns the smaller equivalent problem.
    pub fn reduce_fix(&self, n0: &[usize], n1: &[usize]) -> Result<Reduction, ModelError> {
        let n = self.n();
        let n0 = normalize(n0, n)?;
        let n1 = normalize(n1, n)?;
        let mut fixed = vec![false; n];
        for &i in n0.iter().chain(&n1) {
            if fixed[i] {
                return Err(ModelError::OverlappingFix(i));
            }
            fixed[i] = true;
        }
        let fixed_weight = self.w.weight(&n1);
        if fixed_weight > self.c {
            return Err(ModelError::InfeasibleFixing {
                weight: fixed_weight,
                budget: self.c,
            });
        }
        let keep: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        let reduced = Instance {
            p: keep.iter().map(|&i| self.p[i]).collect(),
            w: self.w.reduce(&keep, &n1),
            c: self.c - fixed_weight,
            factor: if n1.is_empty() && n0.is_empty() {
                self.factor.clone()
            } else {
                None
            },
        };
        Ok(Reduction {
            offset: self.value(&n1),
            reduced,
            index_map: keep,
            fixed0: n0,
            fixed1: n1,
            fixed_weight,
        })
    }

    /// Removes items that are trivially decided, until no rule applies.
    ///
    /// Items with `w_ii > c̃`, or with zero profit, are fixed at 0; items with a
    /// zero diagonal (hence a zero row) and positive profit are fixed at 1.
    pub fn preprocess(&self) -> Preprocessed {
        let n = self.n();
        let mut forced0: Vec<usize> = Vec::new();
        let mut forced1: Vec<usize> = Vec::new();
        loop {
            let red = self
                .reduce_fix(&forced0, &forced1)
                .expect("forced sets stay disjoint and feasible");
            let r = &red.reduced;
            let mut changed = false;
            for k in 0..r.n() {
                let (d, p) = (r.diag(k), r.profit(k));
                let orig = red.index_map[k];
                if d > r.budget() || p == 0 {
                    forced0.push(orig);
                    changed = true;
                } else if d == 0 {
                    // A zero row never changes the weight of anything else.
                    if (0..r.n()).all(|j| r.matrix().get(k, j) == 0) {
                        forced1.push(orig);
                        changed = true;
                    }
                }
            }
            if !changed {
                forced0.sort_unstable();
                forced1.sort_unstable();
                debug_assert!(forced0.len() + forced1.len() + red.reduced.n() == n);
                return Preprocessed {
                    reduction: red,
                    forced0,
                    forced1,
                };
            }
        }
    }
}

/// Result of fixing variables (see [`Instance::reduce_fix`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub reduced: Instance,
    /// `pᵀχ_{N1}`.
    pub offset: u64,
    /// Reduced index → original index.
    pub index_map: Vec<usize>,
    pub fixed0: Vec<usize>,
    pub fixed1: Vec<usize>,
    /// `w(N1)`; the reduced budget is `c − fixed_weight`.
    pub fixed_weight: u64,
}

impl Reduction {
    /// Maps a reduced selection back to original indices and adds the fixed ones.
    pub fn lift(&self, reduced_sel: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = reduced_sel.iter().map(|&k| self.index_map[k]).collect();
        out.extend_from_slice(&self.fixed1);
        out.sort_unstable();
        out
    }

    /// Maps original indices of free items to reduced indices. Fixed items are dropped.
    pub fn project(&self, original: &[usize]) -> Vec<usize> {
        original
            .iter()
            .filter_map(|i| self.index_map.binary_search(i).ok())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub reduction: Reduction,
    pub forced0: Vec<usize>,
    pub forced1: Vec<usize>,
}

/// One constraint `xᵀWx ≤ c` of a [`MultiInstance`].
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub w: WeightMatrix,
    pub c: u64,
}

/// Packing problem with `r` quadratic knapsack constraints sharing one profit vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiInstance {
    p: Vec<u64>,
    constraints: Vec<Constraint>,
}

impl MultiInstance {
    pub const MAX_CONSTRAINTS: usize = 8;

    pub fn new(p: Vec<u64>, constraints: Vec<Constraint>) -> Result<Self, ModelError> {
        if constraints.is_empty() || constraints.len() > Self::MAX_CONSTRAINTS {
            return Err(ModelError::ConstraintCount {
                got: constraints.len(),
                max: Self::MAX_CONSTRAINTS,
            });
        }
        for k in &constraints {
            if k.w.n() != p.len() {
                return Err(ModelError::DimensionMismatch {
                    matrix: k.w.n(),
                    profits: p.len(),
                });
            }
        }
        sum_profits(&p)?;
        Ok(Self { p, constraints })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn r(&self) -> usize {
        self.constraints.len()
    }

    pub fn profits(&self) -> &[u64] {
        &self.p
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn value(&self, sel: &[usize]) -> u64 {
        sel.iter().map(|&i| self.p[i]).sum()
    }

    pub fn evaluate(&self, sel: &[usize]) -> Solution {
        let selected = normalize(sel, self.n()).expect("selection index out of range");
        let weights: Vec<u64> = self.constraints.iter().map(|k| k.w.weight(&selected)).collect();
        let feasible = weights.iter().zip(&self.constraints).all(|(&w, k)| w <= k.c);
        Solution {
            value: self.value(&selected),
            weights,
            feasible,
            selected,
            provenance: Provenance::default(),
        }
    }

    /// Restriction to the items in `keep` (everything else fixed at zero).
    pub fn restrict(&self, keep: &[usize]) -> MultiInstance {
        MultiInstance {
            p: keep.iter().map(|&i| self.p[i]).collect(),
            constraints: self
                .constraints
                .iter()
                .map(|k| Constraint {
                    w: k.w.reduce(keep, &[]),
                    c: k.c,
                })
                .collect(),
        }
    }

    /// Variable fixing applied to every constraint at once.
    pub fn reduce_fix(&self, n0: &[usize], n1: &[usize]) -> Result<(MultiInstance, Vec<usize>, u64), ModelError> {
        let n = self.n();
        let n0 = normalize(n0, n)?;
        let n1 = normalize(n1, n)?;
        let mut fixed = vec![false; n];
        for &i in n0.iter().chain(&n1) {
            if fixed[i] {
                return Err(ModelError::OverlappingFix(i));
            }
            fixed[i] = true;
        }
        let keep: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        let mut constraints = Vec::with_capacity(self.r());
        for k in &self.constraints {
            let fw = k.w.weight(&n1);
            if fw > k.c {
                return Err(ModelError::InfeasibleFixing {
                    weight: fw,
                    budget: k.c,
                });
            }
            constraints.push(Constraint {
                w: k.w.reduce(&keep, &n1),
                c: k.c - fw,
            });
        }
        let reduced = MultiInstance {
            p: keep.iter().map(|&i| self.p[i]).collect(),
            constraints,
        };
        Ok((reduced, keep, self.value(&n1)))
    }

    /// The `k`-th constraint as a single-constraint instance.
    pub fn single(&self, k: usize) -> Instance {
        Instance {
            p: self.p.clone(),
            w: self.constraints[k].w.clone(),
            c: self.constraints[k].c,
            factor: None,
        }
    }
}

impl From<&Instance> for MultiInstance {
    fn from(inst: &Instance) -> Self {
        MultiInstance {
            p: inst.p.clone(),
            constraints: vec![Constraint {
                w: inst.w.clone(),
                c: inst.c,
            }],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> Instance {
        Instance::new(&[vec![2, 1], vec![1, 2]], vec![1, 1], 3).unwrap()
    }

    #[test]
    fn validate_accepts_psd_matrix() {
        let inst = two_by_two();
        assert_eq!(inst.n(), 2);
        assert_eq!(inst.diag(0), 2);
    }

    #[test]
    fn validate_rejects_indefinite_matrix() {
        let err = Instance::new(&[vec![0, 1], vec![1, 0]], vec![1, 1], 1).unwrap_err();
        assert!(matches!(err, ModelError::NotPsd { .. }), "{err:?}");
        let err = Instance::new(&[vec![1, 2], vec![2, 1]], vec![1, 1], 1).unwrap_err();
        assert!(matches!(err, ModelError::NotPsd { .. }), "{err:?}");
    }

    #[test]
    fn validate_rejects_asymmetric_and_negative() {
        let err = Instance::new(&[vec![1, 2], vec![1, 2]], vec![1, 1], 1).unwrap_err();
        assert!(matches!(err, ModelError::AsymmetricMatrix { .. }));
        let err = Instance::new(&[vec![1, -1], vec![-1, 1]], vec![1, 1], 1).unwrap_err();
        assert!(matches!(err, ModelError::NegativeEntry { .. }));
        let err = Instance::new(&[vec![1, 0]], vec![1], 1).unwrap_err();
        assert!(matches!(err, ModelError::NotSquare { .. }));
        let err = Instance::new(&[vec![1]], vec![1, 2], 1).unwrap_err();
        assert!(matches!(err, ModelError::DimensionMismatch { .. }));
    }

    #[test]
    fn validate_rejects_overflow() {
        let big = 1i64 << 61;
        let err = Instance::new(&[vec![big, 0], vec![0, big]], vec![1, 1], 1).unwrap_err();
        assert_eq!(err, ModelError::Overflow);
    }

    #[test]
    fn weight_and_marginal() {
        let inst = two_by_two();
        assert_eq!(inst.weight(&[]), 0);
        assert_eq!(inst.weight(&[0]), 2);
        assert_eq!(inst.weight(&[0, 1]), 6);
        assert_eq!(inst.marginal_weight(&[], 0), 2);
        assert_eq!(inst.marginal_weight(&[0], 1), 4);
        let d = Instance::from_matrix(WeightMatrix::diagonal(&[5, 4, 4]), vec![6, 5, 5], 8).unwrap();
        assert_eq!(d.marginal_weight(&[1], 2), 4);
    }

    #[test]
    fn evaluate_examples() {
        let d = Instance::from_matrix(WeightMatrix::diagonal(&[5, 4, 4]), vec![6, 5, 5], 8).unwrap();
        let s = d.evaluate(&[1, 2]);
        assert_eq!((s.value, s.weight(), s.feasible), (10, 8, true));
        let s = d.evaluate(&[]);
        assert_eq!((s.value, s.weight(), s.feasible), (0, 0, true));
        let s = d.evaluate(&[0, 1]);
        assert_eq!((s.weight(), s.feasible), (9, false));
    }

    #[test]
    fn reduce_fix_examples() {
        let inst = Instance::new(&[vec![2, 1], vec![1, 2]], vec![3, 7], 10).unwrap();
        let red = inst.reduce_fix(&[], &[1]).unwrap();
        assert_eq!(red.reduced.matrix().to_dense(), vec![vec![4]]);
        assert_eq!(red.reduced.budget(), 8);
        assert_eq!(red.offset, 7);
        assert_eq!(red.lift(&[0]), vec![0, 1]);

        let red = inst.reduce_fix(&[], &[]).unwrap();
        assert_eq!(red.reduced, inst);
        assert_eq!(red.offset, 0);

        let red = inst.reduce_fix(&[0], &[]).unwrap();
        assert_eq!(red.reduced.matrix().to_dense(), vec![vec![2]]);
        assert_eq!(red.reduced.budget(), 10);
    }

    #[test]
    fn reduce_fix_errors() {
        let inst = Instance::new(&[vec![2, 1], vec![1, 2]], vec![3, 7], 5).unwrap();
        assert!(matches!(
            inst.reduce_fix(&[], &[0, 1]),
            Err(ModelError::InfeasibleFixing { weight: 6, budget: 5 })
        ));
        assert_eq!(inst.reduce_fix(&[0], &[0]), Err(ModelError::OverlappingFix(0)));
        assert!(matches!(
            inst.reduce_fix(&[4], &[]),
            Err(ModelError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn preprocess_examples() {
        let inst = Instance::new(&[vec![0, 0], vec![0, 3]], vec![1, 1], 2).unwrap();
        let pre = inst.preprocess();
        assert_eq!(pre.forced1, vec![0]);
        assert_eq!(pre.forced0, vec![1]);
        assert_eq!(pre.reduction.reduced.n(), 0);

        let inst = Instance::from_matrix(WeightMatrix::diagonal(&[1, 1]), vec![0, 1], 2).unwrap();
        let pre = inst.preprocess();
        assert_eq!(pre.forced0, vec![0]);
        assert!(pre.forced1.is_empty());

        let inst = Instance::from_matrix(WeightMatrix::diagonal(&[1, 1]), vec![1, 1], 2).unwrap();
        let pre = inst.preprocess();
        assert!(pre.forced0.is_empty() && pre.forced1.is_empty());
        assert_eq!(pre.reduction.reduced.n(), 2);
    }

    #[test]
    fn factor_weight_matches_dense() {
        let f = FactorForm::new(3, vec![vec![1, 2, 0], vec![0, 1, 3]], Some(vec![2, 1])).unwrap();
        let inst = Instance::from_factor(f.clone(), vec![1, 1, 1], 100).unwrap();
        for sel in [vec![], vec![0], vec![1, 2], vec![0, 1, 2]] {
            assert_eq!(inst.weight(&sel) as u128, f.weight(&sel));
        }
        // w_01 = 2·1·2 + 1·0·1
        assert_eq!(inst.matrix().get(0, 1), 4);
        assert!(check_psd(inst.matrix()).is_ok());
    }

    #[test]
    fn multi_single_roundtrip() {
        let inst = two_by_two();
        let m = MultiInstance::from(&inst);
        assert_eq!(m.r(), 1);
        assert_eq!(m.single(0), inst);
        assert_eq!(m.evaluate(&[0, 1]).feasible, inst.evaluate(&[0, 1]).feasible);
    }
}
