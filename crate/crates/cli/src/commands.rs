//! Command-line surface: argument definitions and subcommand bodies.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use randswitch::frank_wolfe;
use randswitch::io::{read_instance, write_instance, Instance};
use randswitch::oracle;
use randswitch::rounding::{self, RNG_ALGORITHM};
use randswitch::{congestion, RepairMode, StepRule, SwitchVector};

use crate::error::{CliError, CliResult};
use crate::experiment::{
    instance_digest, records_csv, records_json, repeat_seed, run_experiment, to_csv, write_file,
    write_outputs, ExperimentConfig, SCHEMA_VERSION,
};
use crate::generator::{generate_instance, DemandKind, GeneratorSpec};

#[derive(Debug, Parser)]
#[command(
    name = "randswitch",
    version,
    about = "Budgeted network reconfiguration by relaxed switching"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Writes a random instance file.
    Generate(GenerateArgs),
    /// Runs Frank–Wolfe and reports the fractional solution.
    Solve(SolveArgs),
    /// Rounds a fractional solution to configurations.
    Round(RoundArgs),
    /// Computes the gap certificate at a switch vector.
    Certify(CertifyArgs),
    /// Finds the exact optimum by enumeration.
    Enumerate(EnumerateArgs),
    /// Runs the full experiment pipeline from a config file or flags.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub extra_edges: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, value_enum, default_value_t = DemandArg::Pair)]
    pub demand: DemandArg,
    #[arg(long)]
    pub multigraph: bool,
    #[arg(long, default_value_t = 0.5)]
    pub weight_lo: f64,
    #[arg(long, default_value_t = 2.0)]
    pub weight_hi: f64,
    /// Instance file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DemandArg {
    Pair,
    Gaussian,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Overrides the instance budget.
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
    /// Relative energy-norm tolerance of each Laplacian solve.
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = StepArg::MonotoneGuard)]
    pub step_rule: StepArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StepArg {
    Classic,
    MonotoneGuard,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// `csv` writes the iteration trace.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RoundArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Switch vector as written by `solve` (or a bare JSON array); solves
    /// first when absent.
    #[arg(long)]
    pub switches: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value_t = RepairArg::TrimAndFill)]
    pub repair: RepairArg,
    #[arg(long, default_value_t = 0.0)]
    pub p_min_constant: f64,
    #[arg(long, default_value_t = 64)]
    pub max_resamples: usize,
    /// Tests each raw draw against the spectral sandwich (dense path).
    #[arg(long)]
    pub check_sandwich: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RepairArg {
    TrimAndFill,
    Resample,
    Shrinkage,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Switch vector to certify; the backbone indicator when absent.
    #[arg(long)]
    pub switches: Option<PathBuf>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub q: Option<usize>,
    /// Includes the value of every configuration (small instances only).
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// TOML experiment description; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub extra_edges: Option<usize>,
    /// Comma-separated node counts for a scaling sweep.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub enumerate: bool,
    /// Records in `--format`; the config's output paths are also honoured.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

fn emit(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(p) => write_file(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("stdout", e)),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

fn load(path: &Path, q: Option<usize>) -> CliResult<Instance> {
    let mut inst = read_instance(path).map_err(|e| match e {
        randswitch::Error::Io(io) => CliError::io(path, io),
        other => other.into(),
    })?;
    if let Some(q) = q {
        inst.q = q;
    }
    Ok(inst)
}

/// Reads `{"s": [...]}` (the `solve` output) or a bare array.
fn load_switches(path: &Path, inst: &Instance) -> CliResult<SwitchVector> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::format("switch file", e))?;
    let array = value.get("s").unwrap_or(&value);
    let s: Vec<f64> =
        serde_json::from_value(array.clone()).map_err(|e| CliError::format("switch file", e))?;
    let s = SwitchVector::new(&inst.graph, s)?;
    if s.l1_norm() > inst.q as f64 * (1.0 + 1e-12) {
        return Err(randswitch::Error::InvalidInput(format!(
            "switch vector has l1 norm {} above the budget {}",
            s.l1_norm(),
            inst.q
        ))
        .into());
    }
    Ok(s)
}

impl SolverArgs {
    fn fw(&self, q: usize) -> randswitch::FwConfig {
        randswitch::FwConfig {
            q,
            alpha: self.alpha,
            max_iterations: self.max_iterations,
            step_rule: match self.step_rule {
                StepArg::Classic => StepRule::Classic,
                StepArg::MonotoneGuard => StepRule::MonotoneGuard,
            },
            solver: randswitch::SolverConfig::with_epsilon(self.epsilon),
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Round(a) => round(a),
        Command::Certify(a) => certify(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Bench(a) => bench(a),
    }
}

fn generate(a: GenerateArgs) -> CliResult<()> {
    let spec = GeneratorSpec {
        n: a.n,
        extra_edges: a.extra_edges,
        weight_lo: a.weight_lo,
        weight_hi: a.weight_hi,
        demand: match a.demand {
            DemandArg::Pair => DemandKind::Pair,
            DemandArg::Gaussian => DemandKind::Gaussian,
        },
        multigraph: a.multigraph,
        q: a.q,
        seed: a.seed,
    };
    let inst = generate_instance(&spec)?;
    emit(a.output.as_deref(), &write_instance(&inst))
}

fn solve(a: SolveArgs) -> CliResult<()> {
    let inst = load(&a.input, a.solver.q)?;
    let start = Instant::now();
    let out = frank_wolfe::run(&inst.graph, &inst.demand, &a.solver.fw(inst.q))?;
    let secs = start.elapsed().as_secs_f64();
    let text = match a.format {
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "instance_digest": instance_digest(&inst),
            "q": inst.q,
            "s": out.s,
            "certificate": out.certificate,
            "iterations": out.iterations,
            "trace": out.trace.records,
            "timing": { "solve_secs": secs },
        })),
        Format::Csv => to_csv(out.trace.records.iter().copied())?,
    };
    emit(a.output.as_deref(), &text)
}

#[derive(Debug, Clone, Serialize)]
struct DrawRow {
    repeat: usize,
    seed: u64,
    phi: f64,
    closed: usize,
    raw_closed: usize,
    resamples_used: usize,
    repairs: usize,
    epsilon_bound: Option<f64>,
    sandwich_checked: Option<bool>,
}

fn round(a: RoundArgs) -> CliResult<()> {
    if a.repeats == 0 {
        return Err(CliError::Config("repeats must be at least 1".into()));
    }
    let inst = load(&a.input, a.solver.q)?;
    let (g, d) = (&inst.graph, &inst.demand);
    let s = match &a.switches {
        Some(p) => load_switches(p, &inst)?,
        None => frank_wolfe::run(g, d, &a.solver.fw(inst.q))?.s,
    };
    let params = |seed| randswitch::RoundingParams {
        delta: a.delta,
        p_min_constant: a.p_min_constant,
        repair: match a.repair {
            RepairArg::TrimAndFill => RepairMode::TrimAndFill,
            RepairArg::Resample => RepairMode::Resample,
            RepairArg::Shrinkage => RepairMode::Shrinkage,
        },
        max_resamples: a.max_resamples,
        rng_seed: seed,
        check_sandwich: a.check_sandwich,
    };
    let sbar = rounding::floor_probabilities(&s, g, &params(0))?;
    let solver = randswitch::SolverConfig::with_epsilon(a.solver.epsilon);
    let mut rows = Vec::with_capacity(a.repeats);
    let mut configs = Vec::with_capacity(a.repeats);
    for k in 0..a.repeats {
        let seed = repeat_seed(a.seed, k);
        let report = rounding::sample(&sbar, g, inst.q, &params(seed))?;
        rows.push(DrawRow {
            repeat: k,
            seed,
            phi: congestion::phi(g, &report.sampled.to_switches(), d, &solver)?,
            closed: report.sampled.closed_count(),
            raw_closed: report.raw_closed,
            resamples_used: report.resamples_used,
            repairs: report.repairs.len(),
            epsilon_bound: report.epsilon_bound.map(|e| e.epsilon),
            sandwich_checked: report.sandwich_checked,
        });
        configs.push(report.sampled);
    }
    let text = match a.format {
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "instance_digest": instance_digest(&inst),
            "rng": RNG_ALGORITHM,
            "base_seed": a.seed,
            "sbar": sbar,
            "draws": rows,
            "configurations": configs,
        })),
        Format::Csv => to_csv(rows)?,
    };
    emit(a.output.as_deref(), &text)
}

fn certify(a: CertifyArgs) -> CliResult<()> {
    let inst = load(&a.input, a.q)?;
    let s = match &a.switches {
        Some(p) => load_switches(p, &inst)?,
        None => SwitchVector::backbone(&inst.graph),
    };
    let cfg = randswitch::FwConfig {
        solver: randswitch::SolverConfig::with_epsilon(a.epsilon),
        ..randswitch::FwConfig::new(inst.q, a.alpha)
    };
    let cert = frank_wolfe::certificate(&inst.graph, &s, &inst.demand, &cfg)?;
    let text = match a.format {
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "instance_digest": instance_digest(&inst),
            "q": inst.q,
            "alpha": a.alpha,
            "certificate": cert,
            "lower_bound": cert.lower_bound(),
        })),
        Format::Csv => to_csv([cert])?,
    };
    emit(a.output.as_deref(), &text)
}

fn enumerate(a: EnumerateArgs) -> CliResult<()> {
    let inst = load(&a.input, a.q)?;
    let mut res = oracle::enumerate_optimal(&inst.graph, &inst.demand, inst.q)?;
    if !a.all {
        res.all_values = None;
    }
    let closed: Vec<usize> = (0..inst.graph.m())
        .filter(|&e| res.best_config.sbin[e])
        .collect();
    let text = match a.format {
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "instance_digest": instance_digest(&inst),
            "q": inst.q,
            "best_phi": res.best_phi,
            "best_closed_edges": closed,
            "evaluated_count": res.evaluated_count,
            "all_values": res.all_values,
        })),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                q: usize,
                best_phi: f64,
                evaluated_count: usize,
                best_closed_edges: String,
            }
            let edges = closed
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            to_csv([Row {
                q: inst.q,
                best_phi: res.best_phi,
                evaluated_count: res.evaluated_count,
                best_closed_edges: edges,
            }])?
        }
    };
    emit(a.output.as_deref(), &text)
}

fn bench(a: BenchArgs) -> CliResult<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if a.input.is_some() {
        cfg.input = a.input;
    }
    if let Some(sweep) = a.sweep {
        cfg.sweep = sweep;
    }
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field { cfg.$field = v; } )* };
    }
    set!(n, extra_edges, seed, alpha, delta, repeats);
    if a.q.is_some() {
        cfg.q = a.q;
    }
    cfg.enumerate |= a.enumerate;
    let records = run_experiment(&cfg)?;
    write_outputs(&cfg, &records)?;
    let to_stdout = cfg.output_json.is_none() && cfg.output_csv.is_none();
    if a.output.is_some() || to_stdout {
        let text = match a.format {
            Format::Json => records_json(&records),
            Format::Csv => records_csv(&records)?,
        };
        emit(a.output.as_deref(), &text)?;
    }
    Ok(())
}
