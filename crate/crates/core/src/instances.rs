//! Instance generators and scenario ingestion.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Constraint, FactorForm, Instance, ModelError, MultiInstance};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("set {index} has {len} elements, expected 6")]
    WrongCardinality { index: usize, len: usize },
    #[error("element {element} of set {index} is outside the ground set of size {ground}")]
    ElementOutOfRange {
        index: usize,
        element: usize,
        ground: usize,
    },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("{path}:{line}: {msg}")]
    ParseError { path: String, line: usize, msg: String },
    #[error("no topology.json in {0}")]
    MissingTopology(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One transport request on a path network: enters at node `entry`, leaves at node `exit`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub entry: usize,
    pub exit: usize,
    pub q: u64,
    pub p: u64,
}

/// A path of `k` pipes (nodes `0..=k`) with per-pipe friction constants and a
/// squared-pressure budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasPathScenario {
    pub beta: Vec<u64>,
    pub requests: Vec<Request>,
    pub c: u64,
}

impl GasPathScenario {
    pub fn edges(&self) -> usize {
        self.beta.len()
    }

    fn validate(&self) -> Result<(), InstanceError> {
        let k = self.edges();
        for (j, r) in self.requests.iter().enumerate() {
            if r.entry >= r.exit || r.exit > k {
                return Err(InstanceError::InvalidParameters(format!(
                    "request {j}: need entry < exit ≤ {k}, got {} → {}",
                    r.entry, r.exit
                )));
            }
        }
        Ok(())
    }
}

/// `w_ij = Σ_{e ∈ E_i ∩ E_j} β_e q_i q_j`, stored as a factor form with per-pipe multipliers.
pub fn gen_gas_path(scenario: &GasPathScenario) -> Result<Instance, InstanceError> {
    scenario.validate()?;
    let n = scenario.requests.len();
    let rows: Vec<Vec<u64>> = (0..scenario.edges())
        .map(|e| {
            scenario
                .requests
                .iter()
                .map(|r| if r.entry <= e && e < r.exit { r.q } else { 0 })
                .collect()
        })
        .collect();
    let f = FactorForm::new(n, rows, Some(scenario.beta.clone()))?;
    let p = scenario.requests.iter().map(|r| r.p).collect();
    Ok(Instance::from_factor(f, p, scenario.c)?)
}

/// Tasks on cores: `W = Σ_i β_i q^i (q^i)ᵀ` where `q^i_j` is task `j`'s load on core `i`.
pub fn gen_speed_scaling(
    betas: &[u64],
    loads: &[Vec<u64>],
    profits: &[u64],
    c: u64,
) -> Result<Instance, InstanceError> {
    let n = loads.len();
    if profits.len() != n {
        return Err(InstanceError::InvalidParameters(format!(
            "{n} tasks but {} profits",
            profits.len()
        )));
    }
    for (j, l) in loads.iter().enumerate() {
        if l.len() != betas.len() {
            return Err(InstanceError::InvalidParameters(format!(
                "task {j} has {} loads for {} cores",
                l.len(),
                betas.len()
            )));
        }
    }
    let rows: Vec<Vec<u64>> = (0..betas.len()).map(|i| loads.iter().map(|l| l[i]).collect()).collect();
    let f = FactorForm::new(n, rows, Some(betas.to_vec()))?;
    Ok(Instance::from_factor(f, profits.to_vec(), c)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarialParams {
    pub m: usize,
    pub k: u64,
    pub l: u64,
}

impl AdversarialParams {
    pub fn q(&self) -> f64 {
        self.l as f64 / self.k as f64
    }
}

/// `ρ(q) = (1 + q²)/(1 + 2q)`.
pub fn rho(q: f64) -> f64 {
    (1.0 + q * q) / (1.0 + 2.0 * q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adversarial {
    pub instance: Instance,
    /// A provably optimal selection: all type-1 items.
    pub certificate: Vec<usize>,
    pub opt_value: u64,
    /// Whether `(m − s)(k² − ℓ²)/(k² + 2kℓ)` is integral for `s = 0` (the analysis assumes it).
    pub integral_count: bool,
}

/// Hard instance for the greedy: `m` heavy items with factor column `k·e_i`
/// and, for each of them, `ℓ` light items with column `e_i`.
///
/// Profits are scaled by `k² + 2kℓ` so that they are integers: heavy items
/// get `k² + 2kℓ`, light items `1 + 2ℓ`. The budget is `mk²`.
pub fn gen_adversarial_greedy(params: AdversarialParams) -> Result<Adversarial, InstanceError> {
    let AdversarialParams { m, k, l } = params;
    if m == 0 || k == 0 || l == 0 || l >= k {
        return Err(InstanceError::InvalidParameters(format!(
            "need m, k, ℓ ≥ 1 and ℓ < k, got m={m}, k={k}, ℓ={l}"
        )));
    }
    let light = m * l as usize;
    let n = m + light;
    let rows: Vec<Vec<u64>> = (0..m)
        .map(|i| {
            let mut row = vec![0u64; n];
            row[i] = k;
            for t in 0..l as usize {
                row[m + i * l as usize + t] = 1;
            }
            row
        })
        .collect();
    let heavy_p = k * k + 2 * k * l;
    let light_p = 1 + 2 * l;
    let p: Vec<u64> = (0..n).map(|j| if j < m { heavy_p } else { light_p }).collect();
    let f = FactorForm::new(n, rows, None)?;
    let instance = Instance::from_factor(f, p, m as u64 * k * k)?;
    let num = m as u128 * (k as u128 * k as u128 - l as u128 * l as u128);
    Ok(Adversarial {
        instance,
        certificate: (0..m).collect(),
        opt_value: m as u64 * heavy_p,
        integral_count: num.is_multiple_of(heavy_p as u128),
    })
}

/// Weights `W = AᵀA` for a family of 6-sets (`a_ej = 1` iff `e ∈ S_j`), unit profits, budget `6k`.
pub fn gen_setpacking(family: &[Vec<usize>], m_ground: usize, k: u64) -> Result<Instance, InstanceError> {
    for (index, s) in family.iter().enumerate() {
        if s.len() != 6 {
            return Err(InstanceError::WrongCardinality { index, len: s.len() });
        }
        if let Some(&element) = s.iter().find(|&&e| e >= m_ground) {
            return Err(InstanceError::ElementOutOfRange {
                index,
                element,
                ground: m_ground,
            });
        }
    }
    let n = family.len();
    let rows: Vec<Vec<u64>> = (0..m_ground)
        .map(|e| family.iter().map(|s| s.contains(&e) as u64).collect())
        .collect();
    let f = FactorForm::new(n, rows, None)?;
    Ok(Instance::from_factor(f, vec![1; n], 6 * k)?)
}

fn random_factor_rows(rng: &mut ChaCha8Rng, n: usize, rank: usize, max_entry: u64) -> Vec<Vec<u64>> {
    let mut rows = vec![vec![0u64; n]; rank];
    for j in 0..n {
        loop {
            for row in rows.iter_mut() {
                row[j] = rng.gen_range(0..=max_entry);
            }
            if rows.iter().any(|r| r[j] != 0) {
                break;
            }
        }
    }
    rows
}

fn check_random(rank: usize, max_entry: u64) -> Result<(), InstanceError> {
    if rank == 0 || max_entry == 0 {
        return Err(InstanceError::InvalidParameters(
            "rank and max_entry must be positive".into(),
        ));
    }
    Ok(())
}

/// Random `W = UᵀU` with `U ∈ {0..max_entry}^{rank×n}` and no zero column,
/// profits in `[1, 100]` and budget in `[max_i w_ii, 1ᵀW1]`.
pub fn gen_random_factor(n: usize, rank: usize, max_entry: u64, seed: u64) -> Result<Instance, InstanceError> {
    check_random(rank, max_entry)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = random_factor_rows(&mut rng, n, rank, max_entry);
    let p: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=100)).collect();
    let f = FactorForm::new(n, rows, None)?;
    let w = f.to_matrix()?;
    let lo = (0..n).map(|i| w.diag(i)).max().unwrap_or(0);
    let hi = w.total() as u64;
    let c = if n == 0 { 0 } else { rng.gen_range(lo..=hi) };
    Ok(Instance::from_factor(f, p, c)?)
}

/// `r` independent random factor-form constraints sharing one profit vector.
pub fn gen_random_multi(
    n: usize,
    r: usize,
    rank: usize,
    max_entry: u64,
    seed: u64,
) -> Result<MultiInstance, InstanceError> {
    check_random(rank, max_entry)?;
    if r == 0 || r > MultiInstance::MAX_CONSTRAINTS {
        return Err(InstanceError::InvalidParameters(format!(
            "constraint count {r} out of range"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=100)).collect();
    let mut constraints = Vec::with_capacity(r);
    for _ in 0..r {
        let rows = random_factor_rows(&mut rng, n, rank, max_entry);
        let w = FactorForm::new(n, rows, None)?.to_matrix()?;
        let lo = (0..n).map(|i| w.diag(i)).max().unwrap_or(0);
        let hi = w.total() as u64;
        let c = if n == 0 { 0 } else { rng.gen_range(lo..=hi) };
        constraints.push(Constraint { w, c });
    }
    Ok(MultiInstance::new(p, constraints)?)
}

/// Random speed-scaling instance: `cores` cores with `β ∈ [1, 5]`, `n` tasks with
/// loads in `[0, 5]` (at least one non-zero), profits in `[1, 100]`.
pub fn gen_random_speed(cores: usize, n: usize, seed: u64) -> Result<Instance, InstanceError> {
    if cores == 0 {
        return Err(InstanceError::InvalidParameters("need at least one core".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let betas: Vec<u64> = (0..cores).map(|_| rng.gen_range(1..=5)).collect();
    let rows = random_factor_rows(&mut rng, n, cores, 5);
    let loads: Vec<Vec<u64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let profits: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=100)).collect();
    let probe = gen_speed_scaling(&betas, &loads, &profits, 0)?;
    let w = probe.matrix();
    let lo = (0..n).map(|i| w.diag(i)).max().unwrap_or(0);
    let hi = (w.total() as u64).max(lo);
    let c = rng.gen_range(lo..=hi);
    gen_speed_scaling(&betas, &loads, &profits, c)
}

/// `count` random 6-subsets of a ground set of size `ground ≥ 6`.
pub fn gen_random_family(count: usize, ground: usize, seed: u64) -> Result<Vec<Vec<usize>>, InstanceError> {
    if ground < 6 {
        return Err(InstanceError::InvalidParameters(format!(
            "ground set of size {ground} has no 6-subsets"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let mut s = rand::seq::index::sample(&mut rng, ground, 6).into_vec();
            s.sort_unstable();
            s
        })
        .collect())
}

/// Random gas path: `k` pipes, `n` requests with random endpoints and demands.
pub fn gen_random_gas(k: usize, n: usize, seed: u64) -> Result<GasPathScenario, InstanceError> {
    if k == 0 {
        return Err(InstanceError::InvalidParameters("need at least one pipe".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<u64> = (0..k).map(|_| rng.gen_range(1..=5)).collect();
    let requests: Vec<Request> = (0..n)
        .map(|_| {
            let entry = rng.gen_range(0..k);
            let exit = rng.gen_range(entry + 1..=k);
            let q = rng.gen_range(1..=20);
            Request { entry, exit, q, p: q }
        })
        .collect();
    let probe = GasPathScenario {
        beta: beta.clone(),
        requests: requests.clone(),
        c: 0,
    };
    let w = gen_gas_path(&probe)?.matrix().clone();
    let lo = (0..n).map(|i| w.diag(i)).max().unwrap_or(0);
    let hi = (w.total() as u64).max(lo);
    let c = lo + (hi - lo) / 3;
    Ok(GasPathScenario { beta, requests, c })
}

/// A sink of the path network; its demand comes from the scenario files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sink {
    pub id: String,
    pub entry: usize,
    pub exit: usize,
}

/// Contents of `topology.json` in a scenario directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub beta: Vec<u64>,
    pub sinks: Vec<Sink>,
    pub c: u64,
    /// Profit per unit of demand.
    #[serde(default = "one")]
    pub theta: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
struct DemandRow {
    sink_id: String,
    q_hat: u64,
}

/// A named instance loaded from a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub instance: Instance,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> InstanceError + '_ {
    move |source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads every `*.csv` in `dir` (sorted by file name) against `dir/topology.json`.
///
/// Each CSV has the header `sink_id,q_hat`; every row becomes a request with
/// demand `q = γ·q̂` and profit `θ·q`. Files without data rows are skipped.
pub fn load_scenarios(dir: &Path, gamma: u64) -> Result<Vec<Scenario>, InstanceError> {
    let topo_path = dir.join("topology.json");
    if !topo_path.is_file() {
        return Err(InstanceError::MissingTopology(dir.display().to_string()));
    }
    let text = std::fs::read_to_string(&topo_path).map_err(io_err(&topo_path))?;
    let topo: Topology = serde_json::from_str(&text).map_err(|e| InstanceError::ParseError {
        path: topo_path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for path in files {
        let requests = read_demands(&path, &topo, gamma)?;
        if requests.is_empty() {
            continue;
        }
        let scenario = GasPathScenario {
            beta: topo.beta.clone(),
            requests,
            c: topo.c,
        };
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.push(Scenario {
            name,
            instance: gen_gas_path(&scenario)?,
        });
    }
    Ok(out)
}

fn read_demands(path: &Path, topo: &Topology, gamma: u64) -> Result<Vec<Request>, InstanceError> {
    let shown = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| InstanceError::ParseError {
        path: shown.clone(),
        line: 0,
        msg: e.to_string(),
    })?;
    let mut requests = Vec::new();
    for (k, rec) in reader.deserialize::<DemandRow>().enumerate() {
        let line = k + 2;
        let row = rec.map_err(|e| InstanceError::ParseError {
            path: shown.clone(),
            line: e.position().map_or(line, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let sink = topo
            .sinks
            .iter()
            .find(|s| s.id == row.sink_id)
            .ok_or_else(|| InstanceError::ParseError {
                path: shown.clone(),
                line,
                msg: format!("unknown sink {:?}", row.sink_id),
            })?;
        let q = row.q_hat.checked_mul(gamma).ok_or_else(|| InstanceError::ParseError {
            path: shown.clone(),
            line,
            msg: "scaled demand overflows".into(),
        })?;
        requests.push(Request {
            entry: sink.entry,
            exit: sink.exit,
            q,
            p: topo.theta * q,
        });
    }
    Ok(requests)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::check_psd;

    #[test]
    fn gas_examples() {
        let one = GasPathScenario {
            beta: vec![1],
            requests: vec![Request {
                entry: 0,
                exit: 1,
                q: 2,
                p: 1,
            }],
            c: 10,
        };
        assert_eq!(gen_gas_path(&one).unwrap().matrix().to_dense(), vec![vec![4]]);
        let shared = GasPathScenario {
            beta: vec![1, 3, 1],
            requests: vec![
                Request {
                    entry: 0,
                    exit: 2,
                    q: 2,
                    p: 1,
                },
                Request {
                    entry: 1,
                    exit: 3,
                    q: 5,
                    p: 1,
                },
            ],
            c: 10,
        };
        assert_eq!(gen_gas_path(&shared).unwrap().matrix().get(0, 1), 30);
        let disjoint = GasPathScenario {
            beta: vec![1, 1],
            requests: vec![
                Request {
                    entry: 0,
                    exit: 1,
                    q: 2,
                    p: 1,
                },
                Request {
                    entry: 1,
                    exit: 2,
                    q: 5,
                    p: 1,
                },
            ],
            c: 10,
        };
        assert_eq!(gen_gas_path(&disjoint).unwrap().matrix().get(0, 1), 0);
    }

    #[test]
    fn speed_examples() {
        let a = gen_speed_scaling(&[2], &[vec![1], vec![1]], &[1, 1], 5).unwrap();
        assert_eq!(a.matrix().to_dense(), vec![vec![2, 2], vec![2, 2]]);
        let b = gen_speed_scaling(&[1, 1], &[vec![1, 0], vec![0, 1]], &[1, 1], 5).unwrap();
        assert_eq!(b.matrix().to_dense(), vec![vec![1, 0], vec![0, 1]]);
        let z = gen_speed_scaling(&[1], &[vec![0], vec![1]], &[1, 1], 5).unwrap();
        assert_eq!(z.preprocess().forced1, vec![0]);
    }

    #[test]
    fn random_speed_and_family() {
        let inst = gen_random_speed(3, 7, 1).unwrap();
        check_psd(inst.matrix()).unwrap();
        assert!(inst.budget() >= (0..7).map(|i| inst.diag(i)).max().unwrap());
        let fam = gen_random_family(5, 9, 2).unwrap();
        assert!(fam
            .iter()
            .all(|s| s.len() == 6 && s.windows(2).all(|w| w[0] < w[1]) && s[5] < 9));
        assert!(gen_setpacking(&fam, 9, 2).is_ok());
        assert!(gen_random_family(1, 5, 0).is_err());
    }

    #[test]
    fn adversarial_small() {
        let a = gen_adversarial_greedy(AdversarialParams { m: 2, k: 3, l: 2 }).unwrap();
        let inst = &a.instance;
        assert_eq!(inst.n(), 6);
        assert_eq!(inst.budget(), 18);
        assert_eq!(inst.diag(0), 9);
        assert_eq!(inst.matrix().get(2, 3), 1);
        assert_eq!(inst.matrix().get(0, 2), 3);
        assert_eq!(inst.matrix().get(0, 4), 0);
        assert_eq!(inst.weight(&a.certificate), 18);
        assert!(gen_adversarial_greedy(AdversarialParams { m: 1, k: 3, l: 3 }).is_err());
    }

    #[test]
    fn setpacking_examples() {
        let fam = vec![vec![0, 1, 2, 3, 4, 5], vec![6, 7, 8, 9, 10, 11]];
        let inst = gen_setpacking(&fam, 12, 2).unwrap();
        assert_eq!(inst.matrix().to_dense(), vec![vec![6, 0], vec![0, 6]]);
        let same = gen_setpacking(&[fam[0].clone(), fam[0].clone()], 6, 1).unwrap();
        assert_eq!(same.matrix().get(0, 1), 6);
        assert_eq!(gen_setpacking(&[], 0, 0).unwrap().n(), 0);
        assert!(matches!(
            gen_setpacking(&[vec![0, 1]], 6, 1),
            Err(InstanceError::WrongCardinality { index: 0, len: 2 })
        ));
    }

    #[test]
    fn random_is_deterministic_and_valid() {
        let a = gen_random_factor(12, 3, 5, 42).unwrap();
        let b = gen_random_factor(12, 3, 5, 42).unwrap();
        assert_eq!(a, b);
        assert!(check_psd(a.matrix()).is_ok());
        assert!((0..12).all(|i| a.diag(i) > 0));
        assert!(a.budget() >= (0..12).map(|i| a.diag(i)).max().unwrap());
    }
}
