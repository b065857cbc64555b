//! `qkpack`: generate instances, solve them, benchmark solvers, run the auction.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when a solver fails.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qkpack::bench::{self, Algorithm, BenchConfig, NamedInstance, OracleMode, Preset};
use qkpack::golden::golden_ratio_solve;
use qkpack::greedy::{greedy_from, greedy_solve};
use qkpack::instances::{self, AdversarialParams};
use qkpack::io::{any_from_json, instance_to_json, multi_to_json, AnyInstance, INSTANCE_EXT};
use qkpack::mechanism::critical_payments;
use qkpack::model::{Instance, MultiInstance, Solution};
use qkpack::multi::{randomized_rounding, rounding_with_starts, rr_with_enumeration, Ratio, RoundingConfig};
use qkpack::oracle::{branch_and_bound, brute_force_multi};

#[derive(Debug)]
enum CliError {
    Input(String),
    Solver(String),
}

impl CliError {
    fn input(e: impl std::fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }

    fn solver(e: impl std::fmt::Display) -> Self {
        CliError::Solver(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "qkpack",
    version,
    about = "Packing under convex quadratic knapsack constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance (JSON on stdout or --out).
    Gen(GenArgs),
    /// Solve an instance file.
    Solve(SolveArgs),
    /// Run an algorithm × instance grid and write a CSV report.
    Bench(BenchArgs),
    /// Allocate and price with the strategyproof mechanism.
    Mech(MechArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Gas,
    Speed,
    Adversarial,
    Setpacking,
    Random,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Number of items (requests, tasks, sets).
    #[arg(long, default_value_t = 12)]
    n: usize,
    /// Factor rank for random instances, pipes for gas, cores for speed scaling.
    #[arg(long, default_value_t = 3)]
    rank: usize,
    #[arg(long, default_value_t = 6)]
    max_entry: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of constraints; with r ≥ 1 a multi-constraint random instance is written.
    #[arg(long)]
    multi: Option<usize>,
    /// Adversarial family parameters.
    #[arg(long, default_value_t = 20)]
    m: usize,
    #[arg(long, default_value_t = 50)]
    k: u64,
    #[arg(long, default_value_t = 31)]
    l: u64,
    /// Set packing: JSON list of 6-sets (random sets when absent).
    #[arg(long)]
    family: Option<PathBuf>,
    /// Set packing: ground set size.
    #[arg(long, default_value_t = 24)]
    ground: usize,
    /// Set packing: number of sets to pack (budget 6k).
    #[arg(long, default_value_t = 2)]
    pack: u64,
    /// Gas: scenario directory (topology.json + CSVs); writes one file per scenario into --out.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Gas: demand multiplier γ for scenario directories.
    #[arg(long, default_value_t = 1)]
    gamma: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Alg {
    Greedy,
    Golden,
    Rrounding,
    Exact,
    RrHeavy,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    alg: Alg,
    #[arg(long = "enum", default_value_t = 0)]
    enum_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include the greedy trace of the winning start set.
    #[arg(long)]
    trace: bool,
    /// Heavy-item threshold δ as `a/b` for rr-heavy.
    #[arg(long, default_value = "1/4")]
    delta: String,
    /// Rounding preset: `library` (α_δ, first feasible draw) or `best-of` (uniform α, best of 100 feasible draws).
    #[arg(long, default_value = "library")]
    preset: String,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of instance files or gas scenarios.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Use N seeded random factor-form instances instead of a suite directory.
    #[arg(long)]
    random: Option<u64>,
    #[arg(long, default_value_t = 12)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    rank: usize,
    #[arg(long, value_delimiter = ',', default_value = "greedy,golden,rrounding")]
    algs: Vec<String>,
    #[arg(long = "enum", value_delimiter = ',', default_value = "0,1,2")]
    enum_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value = "brute")]
    oracle: String,
    #[arg(long, default_value = "library")]
    preset: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MechArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated bids replacing the instance's profits.
    #[arg(long, value_delimiter = ',')]
    bids: Option<Vec<u64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(CliError::input(e)),
                _ => Ok(()),
            }
        }
    }
}

fn gen(a: &GenArgs) -> Result<()> {
    if let Some(r) = a.multi {
        let m = instances::gen_random_multi(a.n, r, a.rank, a.max_entry, a.seed).map_err(CliError::input)?;
        return emit(a.out.as_deref(), &multi_to_json(&m));
    }
    let inst = match a.kind {
        Kind::Random => instances::gen_random_factor(a.n, a.rank, a.max_entry, a.seed).map_err(CliError::input)?,
        Kind::Speed => instances::gen_random_speed(a.rank, a.n, a.seed).map_err(CliError::input)?,
        Kind::Adversarial => {
            let p = AdversarialParams { m: a.m, k: a.k, l: a.l };
            let adv = instances::gen_adversarial_greedy(p).map_err(CliError::input)?;
            if !adv.integral_count {
                eprintln!("note: (m−s)(k²−ℓ²)/(k²+2kℓ) is not integral for these parameters");
            }
            adv.instance
        }
        Kind::Setpacking => {
            let family = match &a.family {
                Some(p) => serde_json::from_str(&read_text(p)?).map_err(CliError::input)?,
                None => instances::gen_random_family(a.n, a.ground, a.seed).map_err(CliError::input)?,
            };
            instances::gen_setpacking(&family, a.ground, a.pack).map_err(CliError::input)?
        }
        Kind::Gas => {
            if let Some(dir) = &a.scenarios {
                return gen_scenarios(dir, a.gamma, a.out.as_deref());
            }
            let sc = instances::gen_random_gas(a.rank, a.n, a.seed).map_err(CliError::input)?;
            instances::gen_gas_path(&sc).map_err(CliError::input)?
        }
    };
    emit(a.out.as_deref(), &instance_to_json(&inst))
}

fn gen_scenarios(dir: &Path, gamma: u64, out: Option<&Path>) -> Result<()> {
    let Some(out) = out else {
        return Err(CliError::Input("--scenarios needs --out <directory>".into()));
    };
    let scenarios = instances::load_scenarios(dir, gamma).map_err(CliError::input)?;
    fs::create_dir_all(out).map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
    for s in &scenarios {
        let path = out.join(format!("{}{INSTANCE_EXT}", s.name));
        fs::write(&path, instance_to_json(&s.instance))
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    eprintln!("wrote {} instances to {}", scenarios.len(), out.display());
    Ok(())
}

fn rounding_config(preset: &str, r: usize, seed: u64) -> Result<RoundingConfig> {
    Ok(match preset.parse::<Preset>().map_err(CliError::input)? {
        Preset::Library => RoundingConfig::for_constraints(r, seed),
        Preset::BestOf => RoundingConfig::best_of_uniform(seed),
    })
}

fn solve_single(a: &SolveArgs, inst: &Instance) -> Result<Value> {
    let sol: Solution = match a.alg {
        Alg::Greedy => greedy_solve(inst, a.enum_size).map_err(CliError::input)?,
        Alg::Golden => golden_ratio_solve(inst, a.enum_size).map_err(CliError::solver)?,
        Alg::Rrounding => {
            let cfg = rounding_config(&a.preset, 1, a.seed)?;
            rounding_with_starts(inst, a.enum_size, &cfg).map_err(CliError::solver)?
        }
        Alg::Exact => branch_and_bound(inst).map_err(CliError::solver)?,
        Alg::RrHeavy => return solve_multi(a, &MultiInstance::from(inst)),
    };
    let mut out = json!({ "solution": sol });
    if a.trace && a.alg == Alg::Greedy {
        let (_, trace) = greedy_from(inst, &sol.provenance.start).map_err(CliError::solver)?;
        out["trace"] = serde_json::to_value(trace).map_err(CliError::solver)?;
    }
    Ok(out)
}

fn solve_multi(a: &SolveArgs, m: &MultiInstance) -> Result<Value> {
    let outcome = match a.alg {
        Alg::Rrounding => {
            randomized_rounding(m, &rounding_config(&a.preset, m.r(), a.seed)?).map_err(CliError::solver)?
        }
        Alg::RrHeavy => {
            let delta: Ratio = a.delta.parse().map_err(CliError::input)?;
            rr_with_enumeration(m, delta, 1e-6, a.seed).map_err(CliError::solver)?
        }
        Alg::Exact => {
            let sol = brute_force_multi(m).map_err(CliError::input)?;
            return Ok(json!({ "solution": sol }));
        }
        Alg::Greedy | Alg::Golden => {
            return Err(CliError::Input(
                "greedy and golden take single-constraint instances; use rrounding, rr-heavy or exact".into(),
            ))
        }
    };
    Ok(json!({
        "solution": outcome.solution,
        "draws": outcome.draws,
        "feasible_draws": outcome.feasible_draws,
        "exhausted": outcome.exhausted,
        "relax_value": outcome.relax_value,
    }))
}

fn solve(a: &SolveArgs) -> Result<()> {
    let text = read_text(&a.input)?;
    let out = match any_from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", a.input.display())))? {
        AnyInstance::Single(inst) => solve_single(a, &inst)?,
        AnyInstance::Multi(m) => solve_multi(a, &m)?,
    };
    emit(
        a.out.as_deref(),
        &serde_json::to_string_pretty(&out).map_err(CliError::solver)?,
    )
}

fn bench_cmd(a: &BenchArgs) -> Result<()> {
    let instances = match (&a.suite, a.random) {
        (Some(dir), None) => bench::load_suite(dir).map_err(CliError::input)?,
        (None, Some(count)) => (0..count)
            .map(|s| {
                instances::gen_random_factor(a.n, a.rank, 6, s)
                    .map(|instance| NamedInstance {
                        id: format!("random-{s:05}"),
                        instance,
                    })
                    .map_err(CliError::input)
            })
            .collect::<Result<_>>()?,
        _ => return Err(CliError::Input("give exactly one of --suite or --random".into())),
    };
    let mut cfg = BenchConfig::new(instances);
    cfg.algorithms = a
        .algs
        .iter()
        .map(|s| s.parse::<Algorithm>())
        .collect::<std::result::Result<_, _>>()
        .map_err(CliError::input)?;
    cfg.enum_sizes = a.enum_sizes.clone();
    cfg.seeds = a.seeds.clone();
    cfg.oracle = a.oracle.parse::<OracleMode>().map_err(CliError::input)?;
    cfg.preset = a.preset.parse::<Preset>().map_err(CliError::input)?;
    let report = bench::run_bench(&cfg);
    match &a.out {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            bench::write_csv(&report, io::BufWriter::new(f)).map_err(CliError::input)?;
        }
        None => bench::write_csv(&report, io::stdout().lock()).map_err(CliError::input)?,
    }
    let errors = report.rows.iter().filter(|r| r.error.is_some()).count();
    eprint!("{}", bench::format_summary(&report.summary));
    if errors > 0 {
        eprintln!("{errors} rows reported errors");
    }
    Ok(())
}

fn mech(a: &MechArgs) -> Result<()> {
    let text = read_text(&a.input)?;
    let inst = match any_from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", a.input.display())))? {
        AnyInstance::Single(inst) => inst,
        AnyInstance::Multi(_) => {
            return Err(CliError::Input(
                "the mechanism takes single-constraint instances".into(),
            ))
        }
    };
    let inst = match &a.bids {
        Some(b) if b.len() != inst.n() => {
            return Err(CliError::Input(format!("{} bids for {} agents", b.len(), inst.n())));
        }
        Some(b) => inst.with_profits(b.clone()),
        None => inst,
    };
    let out = critical_payments(&inst).map_err(CliError::solver)?;
    emit(
        a.out.as_deref(),
        &serde_json::to_string_pretty(&out).map_err(CliError::solver)?,
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Mech(a) => mech(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(3)
        }
    }
}
