//! The `dopt` command line: `gen`, `ls`, `relax`, `suite`, `brute`.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 infeasible or degenerate
//! instance, 3 inconclusive solver outcome. Errors are written to stderr as
//! one JSON object per line. Every solver command writes a manifest with
//! the crate version, seed, tolerances, caps and the SHA-256 of the
//! instance file.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bench::{brute_force_dopt, run_suite, KRule, SuiteOptions, Variant, DEFAULT_BRUTE_CAP};
use crate::error::{Error, Result};
use crate::local_search::{self, Design, LocalSearchOptions, Start, DEFAULT_TOL_IMPROVE};
use crate::model::{
    generate_cardinality_instance, generate_knapsack_instance, generate_second_order_knapsack_instance,
    unconstrained_first_order_instance, Instance, RNG_ID,
};
use crate::pricing::{ExactMethod, Pricer, DEFAULT_ENUM_CAP, DEFAULT_NODE_LIMIT};
use crate::relaxation::{column_generation, CgParams, MasterOptions, DEFAULT_MASTER_ITERATIONS, DEFAULT_TOL_MASTER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "dopt", version, about = "Experiment-constrained D-optimal design")]
struct Cli {
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance JSON.
    Gen(GenArgs),
    /// Pricing-based local search for an integer design.
    Ls(LsArgs),
    /// Column generation for the continuous relaxation and its bound.
    Relax(RelaxArgs),
    /// Local search and relaxation over a family of instances.
    Suite(SuiteArgs),
    /// Exhaustive optimum for tiny instances.
    Brute(BruteArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GenVariant {
    Cardinality,
    Knapsack,
    #[value(alias = "second_order")]
    SecondOrder,
    Unconstrained,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    variant: GenVariant,
    #[arg(long)]
    d: usize,
    /// Budget; defaults to 2p.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cardinality bound r (cardinality variant; default ⌊d/3⌋).
    #[arg(long)]
    r: Option<i64>,
    /// Pin x₁ = 1 (unconstrained variant).
    #[arg(long)]
    fixed_first: bool,
    /// Output path; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PricerKind {
    Auto,
    Enum,
    Bb,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = PricerKind::Auto)]
    pricer: PricerKind,
    #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
    bb_nodes: u64,
    #[arg(long, default_value_t = DEFAULT_ENUM_CAP)]
    enum_cap: u128,
    #[arg(long, default_value_t = DEFAULT_TOL_IMPROVE)]
    tol_improve: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-6)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_TOL_MASTER)]
    tol_master: f64,
    #[arg(long, default_value_t = DEFAULT_MASTER_ITERATIONS)]
    master_iters: usize,
}

#[derive(Args, Debug)]
struct LsArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start from this design JSON instead of a random design.
    #[arg(long)]
    warm_start: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output directory (design.json, report.json, manifest.json); stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RelaxArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output directory (relaxation.json, trace.jsonl, manifest.json); stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    #[arg(long, value_enum)]
    variant: SuiteVariant,
    #[arg(long)]
    d_min: usize,
    #[arg(long)]
    d_max: usize,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Budget as a multiple of p.
    #[arg(long, default_value_t = 2, conflicts_with = "k")]
    k_times_p: usize,
    /// Fixed budget for every row.
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output directory (report.csv, report.json, manifest.json); stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteVariant {
    Cardinality,
    Knapsack,
    #[value(alias = "second_order")]
    SecondOrder,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct BruteArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BRUTE_CAP)]
    cap: u128,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl SolverArgs {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("tol-improve", self.tol_improve),
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("gamma", self.gamma),
            ("tol-master", self.tol_master),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("--{name} must be positive, got {v}")));
            }
        }
        if self.bb_nodes == 0 || self.enum_cap == 0 || self.master_iters == 0 {
            return Err(Error::InvalidArgument("caps must be positive".into()));
        }
        Ok(())
    }

    fn pricer(&self) -> Pricer {
        let base = match self.pricer {
            PricerKind::Auto => Pricer::default(),
            PricerKind::Enum => Pricer::enumerate(),
            PricerKind::Bb => Pricer::branch_and_bound(),
        };
        Pricer { enum_cap: self.enum_cap, node_limit: self.bb_nodes, ..base }
    }

    fn local_search(&self) -> LocalSearchOptions {
        LocalSearchOptions { tol_improve: self.tol_improve, ..LocalSearchOptions::default() }
    }

    fn cg(&self, seed: u64) -> CgParams {
        CgParams {
            delta: self.delta,
            epsilon: self.epsilon,
            gamma: self.gamma,
            seed,
            master: MasterOptions {
                tol: self.tol_master,
                max_iterations: self.master_iters,
                ..MasterOptions::default()
            },
            ..CgParams::default()
        }
    }

    fn manifest_part(&self) -> Value {
        let method = match self.pricer().exact_method {
            ExactMethod::Enumerate => "enum",
            ExactMethod::BranchAndBound => "bb",
            ExactMethod::Auto { .. } => "auto",
        };
        json!({
            "tolerances": {
                "delta": self.delta,
                "epsilon": self.epsilon,
                "gamma": self.gamma,
                "tol_master": self.tol_master,
                "tol_improve": self.tol_improve,
            },
            "caps": {
                "bb_nodes": self.bb_nodes,
                "enum_cap": self.enum_cap.to_string(),
                "master_iters": self.master_iters,
            },
            "pricer": method,
        })
    }
}

/// Runs the command line with `args` (including the program name) and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let msg = json!({"level": "error", "kind": "usage", "message": e.to_string().trim()});
            let _ = writeln!(err, "{msg}");
            return EXIT_USAGE;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let msg = json!({"level": "error", "kind": error_kind(&e), "message": e.to_string()});
            let _ = writeln!(err, "{msg}");
            exit_code(&e)
        }
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Degenerate(_) | Error::RankTooLow { .. } | Error::Infeasible(_) => EXIT_DEGENERATE,
        Error::IterationCap(_) | Error::CapExceeded { .. } => EXIT_INCONCLUSIVE,
        _ => EXIT_USAGE,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::NotSymmetric(_) => "not_symmetric",
        Error::InconsistentState { .. } => "inconsistent_state",
        Error::RankTooLow { .. } => "rank_too_low",
        Error::Infeasible(_) => "infeasible",
        Error::Degenerate(_) => "degenerate",
        Error::CapExceeded { .. } => "cap_exceeded",
        Error::UnsupportedOrder(_) => "unsupported_order",
        Error::IterationCap(_) => "iteration_cap",
        Error::Lp(_) => "lp",
        Error::Numerical(_) => "numerical",
        Error::InvalidBound(_) => "invalid_bound",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Gen(a) => gen(a, out),
        Command::Ls(a) => ls(a, cli.threads, out),
        Command::Relax(a) => relax(a, cli.threads, out),
        Command::Suite(a) => suite(a, cli.threads, out),
        Command::Brute(a) => brute(a, cli.threads, out),
    }
}

fn gen(a: &GenArgs, out: &mut dyn Write) -> Result<i32> {
    let inst = match a.variant {
        GenVariant::Cardinality => match a.r {
            Some(r) => crate::model::generate_cardinality_with_bound(a.d, r, a.k)?,
            None => generate_cardinality_instance(a.d, a.k)?,
        },
        GenVariant::Knapsack => generate_knapsack_instance(a.d, a.k, a.seed)?,
        GenVariant::SecondOrder => generate_second_order_knapsack_instance(a.d, a.k, a.seed)?,
        GenVariant::Unconstrained => {
            let p = if a.fixed_first { a.d } else { a.d + 1 };
            unconstrained_first_order_instance(a.d, a.fixed_first, a.k.unwrap_or(2 * p))?
        }
    };
    emit(a.out.as_deref(), &inst.to_json()?, out)?;
    Ok(EXIT_OK)
}

fn load_instance(path: &Path) -> Result<(Instance, String)> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let inst = Instance::from_json(&text)?;
    let hash = hex::encode(Sha256::digest(text.as_bytes()));
    Ok((inst, hash))
}

fn manifest(command: &str, seed: u64, hash: &str, threads: usize, solver: Option<&SolverArgs>) -> Value {
    let mut m = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "rng": RNG_ID,
        "instance_sha256": hash,
        "threads": threads,
    });
    if let (Some(s), Some(obj)) = (solver, m.as_object_mut()) {
        if let Value::Object(extra) = s.manifest_part() {
            obj.extend(extra);
        }
    }
    m
}

fn set_threads(threads: usize) {
    if threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn ls(a: &LsArgs, threads: usize, out: &mut dyn Write) -> Result<i32> {
    a.solver.validate()?;
    set_threads(threads);
    let (inst, hash) = load_instance(&a.instance)?;
    let start = match &a.warm_start {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            Start::Warm(Design::from_json(&text, &inst.model)?)
        }
        None => Start::Seed(a.seed),
    };
    let (design, report) = local_search::run(&inst, start, &a.solver.pricer(), &a.solver.local_search())?;
    let man = manifest("ls", a.seed, &hash, threads, Some(&a.solver));
    let design_v: Value = serde_json::from_str(&design.to_json()?)?;
    let report_v = serde_json::to_value(&report)?;
    write_outputs(
        a.out.as_deref(),
        out,
        &[("design.json", &design_v), ("report.json", &report_v), ("manifest.json", &man)],
        &[],
    )?;
    Ok(if report.inconclusive { EXIT_INCONCLUSIVE } else { EXIT_OK })
}

#[derive(Serialize)]
struct WeightedPoint<'a> {
    x: &'a [u32],
    weight: f64,
}

fn relax(a: &RelaxArgs, threads: usize, out: &mut dyn Write) -> Result<i32> {
    a.solver.validate()?;
    set_threads(threads);
    let (inst, hash) = load_instance(&a.instance)?;
    let r = column_generation(&inst, &a.solver.pricer(), &a.solver.cg(a.seed))?;
    let points: Vec<WeightedPoint> = r
        .experiments
        .iter()
        .zip(r.design.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(x, &w)| WeightedPoint { x, weight: w })
        .collect();
    let body = json!({
        "master_objective": r.master_objective(),
        "upper_bound": r.upper_bound,
        "certified": r.certified,
        "iterations": r.iterations,
        "mode": r.mode,
        "design": {"points": points, "k": inst.k},
        "certificate": r.certificate,
    });
    let man = manifest("relax", a.seed, &hash, threads, Some(&a.solver));
    let trace = r.trace_json_lines()?;
    write_outputs(
        a.out.as_deref(),
        out,
        &[("relaxation.json", &body), ("manifest.json", &man)],
        &[("trace.jsonl", &trace)],
    )?;
    Ok(if r.certified { EXIT_OK } else { EXIT_INCONCLUSIVE })
}

fn suite(a: &SuiteArgs, threads: usize, out: &mut dyn Write) -> Result<i32> {
    a.solver.validate()?;
    if a.d_min > a.d_max {
        return Err(Error::InvalidArgument(format!("--d-min {} exceeds --d-max {}", a.d_min, a.d_max)));
    }
    let variant = match a.variant {
        SuiteVariant::Cardinality => Variant::Cardinality,
        SuiteVariant::Knapsack => Variant::Knapsack,
        SuiteVariant::SecondOrder => Variant::SecondOrder,
    };
    let k_rule = a.k.map_or(KRule::TimesP(a.k_times_p), KRule::Fixed);
    let opts =
        SuiteOptions { pricer: a.solver.pricer(), local_search: a.solver.local_search(), cg: a.solver.cg(0), threads };
    let report = run_suite(variant, a.d_min..=a.d_max, k_rule, &a.seeds, &opts)?;
    let mut man = manifest("suite", a.seeds.first().copied().unwrap_or(0), "", threads, Some(&a.solver));
    man["seeds"] = json!(a.seeds);
    man["variant"] = json!(variant);
    man["k_rule"] = json!(k_rule);
    let csv = report.to_csv()?;
    let report_v = serde_json::to_value(&report)?;
    match &a.out {
        Some(dir) => write_outputs(
            Some(dir),
            out,
            &[("report.json", &report_v), ("manifest.json", &man)],
            &[("report.csv", &csv)],
        )?,
        None => match a.format {
            Format::Csv => out.write_all(csv.as_bytes())?,
            Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report_v)?)?,
        },
    }
    let all_ok = report.rows.iter().all(|r| r.status == "ok");
    Ok(if all_ok { EXIT_OK } else { EXIT_INCONCLUSIVE })
}

fn brute(a: &BruteArgs, threads: usize, out: &mut dyn Write) -> Result<i32> {
    let (inst, hash) = load_instance(&a.instance)?;
    let r = brute_force_dopt(&inst, a.cap)?;
    let design_v: Value = serde_json::from_str(&r.optimal_design.to_json()?)?;
    let body = json!({
        "optimum_logdet": r.optimum_logdet,
        "multisets_examined": r.multisets_examined,
        "optimal_design": design_v,
    });
    let mut man = manifest("brute", 0, &hash, threads, None);
    man["cap"] = json!(a.cap.to_string());
    write_outputs(a.out.as_deref(), out, &[("brute.json", &body), ("manifest.json", &man)], &[])?;
    Ok(EXIT_OK)
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => Ok(writeln!(out, "{text}")?),
    }
}

/// Writes each JSON document and text file into `dir`, or one combined JSON
/// object keyed by file stem to `out`.
fn write_outputs(
    dir: Option<&Path>,
    out: &mut dyn Write,
    docs: &[(&str, &Value)],
    texts: &[(&str, &str)],
) -> Result<()> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
            for (name, v) in docs {
                emit(Some(&dir.join(name)), &serde_json::to_string_pretty(v)?, out)?;
            }
            for (name, t) in texts {
                let p = dir.join(name);
                fs::write(&p, t).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            }
            Ok(())
        }
        None => {
            let mut all = serde_json::Map::new();
            for (name, v) in docs {
                all.insert(stem(name).into(), (*v).clone());
            }
            for (name, t) in texts {
                let lines: Vec<Value> = t.lines().filter_map(|l| serde_json::from_str(l).ok()).collect();
                all.insert(stem(name).into(), Value::Array(lines));
            }
            Ok(writeln!(out, "{}", serde_json::to_string_pretty(&Value::Object(all))?)?)
        }
    }
}

fn stem(name: &str) -> &str {
    name.split('.').next().unwrap_or(name)
}
