//! Benchmark harness: algorithm × instance grids, exact ratios, CSV reports.
//!
//! Every row is one algorithm call on one instance. Rows are produced in
//! parallel (with the `parallel` feature) and sorted by
//! `(instance_id, algorithm, enum_size, seed)` so the report is deterministic
//! apart from the `time_ms` column.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::golden::{self, golden_ratio_solve, PHI};
use crate::greedy::{self, greedy_solve};
use crate::instances::{load_scenarios, InstanceError};
use crate::io::{instance_from_json, IoError, INSTANCE_EXT};
use crate::mechanism::{alpha, monotone_solve};
use crate::model::{Instance, Solution};
use crate::multi::{rounding_with_starts, RoundingConfig};
use crate::oracle::{branch_and_bound, brute_force};

pub const CSV_VERSION: &str = "# qkpack-bench v1";
pub const CSV_COLUMNS: [&str; 10] = [
    "instance_id",
    "n",
    "algorithm",
    "enum_size",
    "value",
    "opt_value",
    "ratio",
    "time_ms",
    "seed",
    "error",
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown algorithm {0:?} (expected greedy, golden, rrounding or monotone)")]
    UnknownAlgorithm(String),
    #[error("unknown oracle {0:?} (expected brute, bnb or none)")]
    UnknownOracle(String),
    #[error("unknown preset {0:?} (expected library or best-of)")]
    UnknownPreset(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Instance { path: String, source: IoError },
    #[error(transparent)]
    Scenario(#[from] InstanceError),
    #[error("malformed report: {0}")]
    Report(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Golden,
    Greedy,
    Monotone,
    Rrounding,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Greedy,
        Algorithm::Golden,
        Algorithm::Rrounding,
        Algorithm::Monotone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Golden => "golden",
            Algorithm::Greedy => "greedy",
            Algorithm::Monotone => "monotone",
            Algorithm::Rrounding => "rrounding",
        }
    }

    /// Whether the algorithm consumes the seed.
    pub fn randomized(self) -> bool {
        self == Algorithm::Rrounding
    }

    /// Proven worst-case ratio at this enumeration size, if any holds per run.
    ///
    /// Randomized rounding only has a guarantee in expectation, so it has no
    /// per-row floor.
    pub fn floor(self, enum_size: usize) -> Option<f64> {
        match self {
            Algorithm::Golden if enum_size >= golden::MAX_ENUM => Some(PHI),
            Algorithm::Greedy if enum_size >= greedy::MAX_ENUM => Some(1.0 - 3f64.sqrt() / std::f64::consts::E),
            Algorithm::Monotone => Some(alpha()),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "golden" => Ok(Algorithm::Golden),
            "greedy" => Ok(Algorithm::Greedy),
            "monotone" => Ok(Algorithm::Monotone),
            "rrounding" => Ok(Algorithm::Rrounding),
            _ => Err(BenchError::UnknownAlgorithm(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleMode {
    BruteForce,
    BranchAndBound,
    None,
}

impl FromStr for OracleMode {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "brute" | "brute_force" => Ok(OracleMode::BruteForce),
            "bnb" | "branch_and_bound" => Ok(OracleMode::BranchAndBound),
            "none" => Ok(OracleMode::None),
            _ => Err(BenchError::UnknownOracle(s.to_string())),
        }
    }
}

/// How randomized rounding is configured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Preset {
    /// Fixed `α = α_δ`, first feasible draw.
    #[default]
    Library,
    /// `α` uniform in `[0, 1]` per draw, best of 100 feasible draws.
    BestOf,
}

impl FromStr for Preset {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "library" => Ok(Preset::Library),
            "best-of" => Ok(Preset::BestOf),
            _ => Err(BenchError::UnknownPreset(s.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NamedInstance {
    pub id: String,
    pub instance: Instance,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub instances: Vec<NamedInstance>,
    pub algorithms: Vec<Algorithm>,
    pub enum_sizes: Vec<usize>,
    /// Seeds for randomized algorithms; deterministic ones run once with no seed.
    pub seeds: Vec<u64>,
    pub oracle: OracleMode,
    pub preset: Preset,
}

impl BenchConfig {
    pub fn new(instances: Vec<NamedInstance>) -> Self {
        Self {
            instances,
            algorithms: vec![Algorithm::Greedy, Algorithm::Golden, Algorithm::Rrounding],
            enum_sizes: vec![0, 1, 2],
            seeds: vec![0],
            oracle: OracleMode::BruteForce,
            preset: Preset::Library,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance_id: String,
    pub n: usize,
    pub algorithm: Algorithm,
    pub enum_size: usize,
    pub value: Option<u64>,
    pub opt_value: Option<u64>,
    /// `value / opt_value`; `1` when both are zero, absent without an optimum.
    pub ratio: Option<f64>,
    pub time_ms: f64,
    pub seed: Option<u64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub enum_size: usize,
    /// Rows with a ratio.
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub min: Option<f64>,
    pub errors: usize,
    pub mean_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<SummaryRow>,
}

/// Mean and population standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-(algorithm, enum_size) statistics over `rows`.
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Algorithm, usize), Vec<&BenchRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.algorithm, r.enum_size)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((algorithm, enum_size), rs)| {
            let ratios: Vec<f64> = rs.iter().filter_map(|r| r.ratio).collect();
            let (mean, sd) = mean_sd(&ratios);
            let times: Vec<f64> = rs.iter().map(|r| r.time_ms).collect();
            SummaryRow {
                algorithm,
                enum_size,
                count: ratios.len(),
                mean,
                sd,
                min: ratios.iter().copied().reduce(f64::min),
                errors: rs.iter().filter(|r| r.error.is_some()).count(),
                mean_time_ms: mean_sd(&times).0,
            }
        })
        .collect()
}

struct Job<'a> {
    inst: &'a NamedInstance,
    opt: &'a Result<u64, String>,
    algorithm: Algorithm,
    enum_size: usize,
    seed: Option<u64>,
}

fn optimum(inst: &Instance, oracle: OracleMode) -> Option<Result<u64, String>> {
    match oracle {
        OracleMode::None => None,
        OracleMode::BruteForce => Some(brute_force(inst).map(|s| s.value).map_err(|e| format!("oracle: {e}"))),
        OracleMode::BranchAndBound => Some(
            branch_and_bound(inst)
                .map(|s| s.value)
                .map_err(|e| format!("oracle: {e}")),
        ),
    }
}

fn call(
    inst: &Instance,
    algorithm: Algorithm,
    enum_size: usize,
    seed: u64,
    preset: Preset,
) -> Result<Solution, String> {
    match algorithm {
        Algorithm::Greedy => greedy_solve(inst, enum_size).map_err(|e| e.to_string()),
        Algorithm::Golden => golden_ratio_solve(inst, enum_size).map_err(|e| e.to_string()),
        Algorithm::Monotone => monotone_solve(inst).map(|o| o.solution).map_err(|e| e.to_string()),
        Algorithm::Rrounding => {
            let config = match preset {
                Preset::Library => RoundingConfig::for_constraints(1, seed),
                Preset::BestOf => RoundingConfig::best_of_uniform(seed),
            };
            rounding_with_starts(inst, enum_size, &config).map_err(|e| e.to_string())
        }
    }
}

fn run_job(job: &Job<'_>, oracle: OracleMode, preset: Preset) -> BenchRow {
    let inst = &job.inst.instance;
    let start = Instant::now();
    let result = call(inst, job.algorithm, job.enum_size, job.seed.unwrap_or(0), preset);
    let time_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut row = BenchRow {
        instance_id: job.inst.id.clone(),
        n: inst.n(),
        algorithm: job.algorithm,
        enum_size: job.enum_size,
        value: None,
        opt_value: None,
        ratio: None,
        time_ms,
        seed: job.seed,
        error: None,
    };
    match result {
        Ok(sol) if !sol.feasible => row.error = Some(format!("infeasible solution {:?}", sol.selected)),
        Ok(sol) => row.value = Some(sol.value),
        Err(e) => row.error = Some(e),
    }
    if oracle != OracleMode::None {
        match job.opt {
            Ok(opt) => {
                row.opt_value = Some(*opt);
                if let Some(v) = row.value {
                    row.ratio = Some(if *opt > 0 { v as f64 / *opt as f64 } else { 1.0 });
                    if v > *opt {
                        row.error = Some(format!("value {v} exceeds optimum {opt}"));
                    }
                }
            }
            Err(e) if row.error.is_none() => row.error = Some(e.clone()),
            Err(_) => {}
        }
    }
    row
}

#[cfg(feature = "parallel")]
fn map_jobs<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_jobs<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Runs every algorithm × enum size (× seed, for randomized ones) on every instance.
///
/// Algorithms that take no start sets (`monotone`) run once, under enum size 0.
pub fn run_bench(config: &BenchConfig) -> BenchReport {
    let opts: Vec<Result<u64, String>> = map_jobs(&config.instances, |ni| {
        optimum(&ni.instance, config.oracle).unwrap_or(Ok(0))
    });
    let mut enum_sizes = config.enum_sizes.clone();
    enum_sizes.sort_unstable();
    enum_sizes.dedup();
    let mut algorithms = config.algorithms.clone();
    algorithms.sort_unstable();
    algorithms.dedup();
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();

    let mut jobs = Vec::new();
    for (ni, opt) in config.instances.iter().zip(&opts) {
        for &algorithm in &algorithms {
            let sizes: &[usize] = if algorithm == Algorithm::Monotone {
                &[0]
            } else {
                &enum_sizes
            };
            for &enum_size in sizes {
                if algorithm.randomized() {
                    for &s in &seeds {
                        jobs.push(Job {
                            inst: ni,
                            opt,
                            algorithm,
                            enum_size,
                            seed: Some(s),
                        });
                    }
                } else {
                    jobs.push(Job {
                        inst: ni,
                        opt,
                        algorithm,
                        enum_size,
                        seed: None,
                    });
                }
            }
        }
    }
    let mut rows = map_jobs(&jobs, |j| run_job(j, config.oracle, config.preset));
    rows.sort_by(|a, b| {
        (&a.instance_id, a.algorithm, a.enum_size, a.seed).cmp(&(&b.instance_id, b.algorithm, b.enum_size, b.seed))
    });
    let summary = summarize(&rows);
    BenchReport { rows, summary }
}

fn opt_cell<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// Writes the versioned CSV report.
pub fn write_csv<W: Write>(report: &BenchReport, mut out: W) -> Result<(), BenchError> {
    writeln!(out, "{CSV_VERSION}").map_err(|source| BenchError::Io {
        path: "<report>".into(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in &report.rows {
        w.write_record([
            r.instance_id.clone(),
            r.n.to_string(),
            r.algorithm.to_string(),
            r.enum_size.to_string(),
            opt_cell(&r.value),
            opt_cell(&r.opt_value),
            r.ratio.map(|x| format!("{x:.9}")).unwrap_or_default(),
            format!("{:.3}", r.time_ms),
            opt_cell(&r.seed),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|source| BenchError::Io {
        path: "<report>".into(),
        source,
    })?;
    Ok(())
}

fn parse_opt<T: FromStr>(cell: &str, what: &str) -> Result<Option<T>, BenchError> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|_| BenchError::Report(format!("bad {what} {cell:?}")))
}

/// Reads a report written by [`write_csv`]; the summary is recomputed from the rows.
pub fn read_csv<R: BufRead>(mut input: R) -> Result<BenchReport, BenchError> {
    let mut first = String::new();
    input.read_line(&mut first).map_err(|source| BenchError::Io {
        path: "<report>".into(),
        source,
    })?;
    if first.trim_end() != CSV_VERSION {
        return Err(BenchError::Report(format!(
            "expected {CSV_VERSION:?}, found {:?}",
            first.trim_end()
        )));
    }
    let mut rd = csv::Reader::from_reader(input);
    if rd.headers()?.iter().ne(CSV_COLUMNS) {
        return Err(BenchError::Report("unexpected columns".into()));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let cell = |i: usize| rec.get(i).unwrap_or("");
        rows.push(BenchRow {
            instance_id: cell(0).to_string(),
            n: parse_opt(cell(1), "n")?.unwrap_or(0),
            algorithm: cell(2).parse()?,
            enum_size: parse_opt(cell(3), "enum_size")?.unwrap_or(0),
            value: parse_opt(cell(4), "value")?,
            opt_value: parse_opt(cell(5), "opt_value")?,
            ratio: parse_opt(cell(6), "ratio")?,
            time_ms: parse_opt(cell(7), "time_ms")?.unwrap_or(0.0),
            seed: parse_opt(cell(8), "seed")?,
            error: Some(cell(9).to_string()).filter(|s| !s.is_empty()),
        });
    }
    let summary = summarize(&rows);
    Ok(BenchReport { rows, summary })
}

/// Mean and SD table: one line per algorithm, one column per enum size.
pub fn format_summary(summary: &[SummaryRow]) -> String {
    let mut sizes: Vec<usize> = summary.iter().map(|s| s.enum_size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut by_alg: BTreeMap<Algorithm, BTreeMap<usize, &SummaryRow>> = BTreeMap::new();
    for s in summary {
        by_alg.entry(s.algorithm).or_default().insert(s.enum_size, s);
    }
    let mut out = format!("{:<10}", "algorithm");
    for k in &sizes {
        out.push_str(&format!(" | {:^17}", format!("enum {k}")));
    }
    out.push('\n');
    out.push_str(&format!("{:<10}", ""));
    for _ in &sizes {
        out.push_str(&format!(" | {:>8} {:>8}", "mean", "SD"));
    }
    out.push('\n');
    for (alg, cols) in &by_alg {
        out.push_str(&format!("{:<10}", alg.name()));
        for k in &sizes {
            match cols.get(k) {
                Some(s) if s.count > 0 => out.push_str(&format!(" | {:>8.4} {:>8.4}", s.mean, s.sd)),
                _ => out.push_str(&format!(" | {:>8} {:>8}", "-", "-")),
            }
        }
        out.push('\n');
    }
    out
}

/// Loads a benchmark suite directory.
///
/// The directory may hold `*.qkp.json` instance files, scenario directories
/// (with a `topology.json`), or be a scenario directory itself. Instance ids
/// are file names, or `dir/scenario` for scenarios, sorted.
pub fn load_suite(dir: &Path) -> Result<Vec<NamedInstance>, BenchError> {
    let mut out = Vec::new();
    if dir.join("topology.json").is_file() {
        let prefix = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        for s in load_scenarios(dir, 1)? {
            out.push(NamedInstance {
                id: format!("{prefix}/{}", s.name),
                instance: s.instance,
            });
        }
        return Ok(out);
    }
    let io = |source| BenchError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in entries {
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if path.is_dir() && path.join("topology.json").is_file() {
            out.extend(load_suite(&path)?);
        } else if path.is_file() && name.ends_with(INSTANCE_EXT) {
            let text = std::fs::read_to_string(&path).map_err(|source| BenchError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let instance = instance_from_json(&text).map_err(|source| BenchError::Instance {
                path: path.display().to_string(),
                source,
            })?;
            out.push(NamedInstance {
                id: name.trim_end_matches(INSTANCE_EXT).to_string(),
                instance,
            });
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::gen_random_factor;

    fn row(ratio: f64) -> BenchRow {
        BenchRow {
            instance_id: "a".into(),
            n: 1,
            algorithm: Algorithm::Greedy,
            enum_size: 0,
            value: Some(1),
            opt_value: Some(1),
            ratio: Some(ratio),
            time_ms: 0.0,
            seed: None,
            error: None,
        }
    }

    #[test]
    fn population_sd() {
        let s = summarize(&[row(1.0), row(0.5)]);
        assert_eq!(s.len(), 1);
        assert!((s[0].mean - 0.75).abs() < 1e-15);
        assert!((s[0].sd - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empty_suite() {
        let r = run_bench(&BenchConfig::new(vec![]));
        assert!(r.rows.is_empty() && r.summary.is_empty());
    }

    #[test]
    fn csv_roundtrip() {
        let instances = (0..3)
            .map(|s| NamedInstance {
                id: format!("r{s}"),
                instance: gen_random_factor(7, 2, 4, s).unwrap(),
            })
            .collect();
        let mut cfg = BenchConfig::new(instances);
        cfg.algorithms = Algorithm::ALL.to_vec();
        cfg.seeds = vec![1, 2];
        let report = run_bench(&cfg);
        assert_eq!(report.rows.len(), 3 * (3 + 3 + 6 + 1));
        let mut buf = Vec::new();
        write_csv(&report, &mut buf).unwrap();
        let back = read_csv(&buf[..]).unwrap();
        assert_eq!(back.rows.len(), report.rows.len());
        for (a, b) in back.rows.iter().zip(&report.rows) {
            assert_eq!(
                (a.value, a.opt_value, a.seed, &a.error),
                (b.value, b.opt_value, b.seed, &b.error)
            );
        }
        let table = format_summary(&report.summary);
        assert!(table.contains("greedy") && table.contains("enum 2"), "{table}");
    }
}
