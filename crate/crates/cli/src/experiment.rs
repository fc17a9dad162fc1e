//! Experiment orchestration: instance source, Frank–Wolfe, certificate,
//! repeated rounding and the optional enumeration baseline, serialized as
//! versioned JSON records and a CSV summary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use randswitch::frank_wolfe::{self, Certificate};
use randswitch::io::{read_instance, write_instance, Instance};
use randswitch::oracle::{self, ENUMERATION_CAP};
use randswitch::rounding::{self, rng_stream, RNG_ALGORITHM};
use randswitch::{
    congestion, dense, FwConfig, PreconditionerKind, RepairMode, RoundingParams, SolverConfig,
    StepRule,
};

use crate::error::{CliError, CliResult};
use crate::generator::{generate_instance, DemandKind, GeneratorSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Flat key-value experiment description, one TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Instance file; when absent an instance is generated.
    pub input: Option<PathBuf>,
    pub n: usize,
    pub extra_edges: usize,
    pub weight_lo: f64,
    pub weight_hi: f64,
    pub demand: DemandKind,
    pub multigraph: bool,
    /// Node counts for a scaling sweep; each size gets `extra_ratio * n`
    /// extra edges and seed `seed + index`.
    pub sweep: Vec<usize>,
    pub extra_ratio: f64,
    pub seed: u64,
    /// Overrides the budget of the instance.
    pub q: Option<usize>,
    pub alpha: f64,
    pub max_iterations: usize,
    pub step_rule: StepRule,
    pub solver_epsilon: f64,
    pub preconditioner: PreconditionerKind,
    pub delta: f64,
    pub p_min_constant: f64,
    pub repair: RepairMode,
    pub max_resamples: usize,
    pub check_sandwich: bool,
    pub repeats: usize,
    /// Runs the exact baseline when the instance is within the caps.
    pub enumerate: bool,
    pub output_json: Option<PathBuf>,
    pub output_csv: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let rounding = RoundingParams::default();
        ExperimentConfig {
            input: None,
            n: 100,
            extra_edges: 200,
            weight_lo: 0.5,
            weight_hi: 2.0,
            demand: DemandKind::Pair,
            multigraph: false,
            sweep: Vec::new(),
            extra_ratio: 2.0,
            seed: 0,
            q: None,
            alpha: 0.1,
            max_iterations: 1000,
            step_rule: StepRule::default(),
            solver_epsilon: SolverConfig::default().epsilon,
            preconditioner: PreconditionerKind::BackboneTree,
            delta: rounding.delta,
            p_min_constant: rounding.p_min_constant,
            repair: rounding.repair,
            max_resamples: rounding.max_resamples,
            check_sandwich: false,
            repeats: 10,
            enumerate: false,
            output_json: None,
            output_csv: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::format("config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.repeats == 0 {
            return Err(CliError::Config("repeats must be at least 1".into()));
        }
        if self.input.is_some() && !self.sweep.is_empty() {
            return Err(CliError::Config(
                "input and sweep are mutually exclusive".into(),
            ));
        }
        if !(self.extra_ratio >= 0.0 && self.extra_ratio.is_finite()) {
            return Err(CliError::Config(format!(
                "extra_ratio must be finite and nonnegative, got {}",
                self.extra_ratio
            )));
        }
        self.solver().validate()?;
        self.rounding(0).validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            epsilon: self.solver_epsilon,
            preconditioner: self.preconditioner,
            ..SolverConfig::default()
        }
    }

    pub fn fw(&self, q: usize) -> FwConfig {
        FwConfig {
            q,
            alpha: self.alpha,
            max_iterations: self.max_iterations,
            step_rule: self.step_rule,
            solver: self.solver(),
        }
    }

    pub fn rounding(&self, seed: u64) -> RoundingParams {
        RoundingParams {
            delta: self.delta,
            p_min_constant: self.p_min_constant,
            repair: self.repair,
            max_resamples: self.max_resamples,
            rng_seed: seed,
            check_sandwich: self.check_sandwich,
        }
    }

    fn generator(&self, n: usize, extra_edges: usize, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            n,
            extra_edges,
            weight_lo: self.weight_lo,
            weight_hi: self.weight_hi,
            demand: self.demand,
            multigraph: self.multigraph,
            q: self.q,
            seed,
        }
    }

    /// Instances with their seeds, in run order.
    fn instances(&self) -> CliResult<Vec<(Instance, u64, f64)>> {
        let timed = |spec: GeneratorSpec| -> CliResult<(Instance, u64, f64)> {
            let start = Instant::now();
            let inst = generate_instance(&spec)?;
            Ok((inst, spec.seed, start.elapsed().as_secs_f64()))
        };
        if let Some(path) = &self.input {
            let start = Instant::now();
            let mut inst = read_instance(path).map_err(|e| match e {
                randswitch::Error::Io(io) => CliError::io(path, io),
                other => other.into(),
            })?;
            if let Some(q) = self.q {
                inst.q = q;
            }
            return Ok(vec![(inst, self.seed, start.elapsed().as_secs_f64())]);
        }
        if self.sweep.is_empty() {
            return Ok(vec![timed(self.generator(
                self.n,
                self.extra_edges,
                self.seed,
            ))?]);
        }
        self.sweep
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let extra = (self.extra_ratio * n as f64).round() as usize;
                timed(self.generator(n, extra, self.seed.wrapping_add(i as u64)))
            })
            .collect()
    }
}

/// Seed for rounding repeat `k`, drawn from stream `k + 1` of the base seed.
pub fn repeat_seed(seed: u64, k: usize) -> u64 {
    rng_stream(seed, k as u64 + 1).next_u64()
}

pub fn instance_digest(inst: &Instance) -> String {
    hex::encode(Sha256::digest(write_instance(inst).as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        Summary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub best_phi: f64,
    pub evaluated: usize,
    /// `phi(fractional) / best_phi - 1`; nonpositive up to the certificate.
    pub fractional_gap: f64,
    /// `min rounded phi / best_phi - 1`.
    pub rounded_gap: f64,
}

/// Wall times in seconds; excluded from the record digest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub instance_secs: f64,
    pub solve_secs: f64,
    pub per_iteration_secs: f64,
    pub rounding_secs: f64,
    pub enumeration_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub instance_digest: String,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub q: usize,
    pub backbone_len: usize,
    pub alpha: f64,
    pub delta: f64,
    pub fractional_phi: f64,
    pub certificate: Certificate,
    pub iterations: usize,
    pub solver_iterations: usize,
    pub repeats: usize,
    pub rounded_phi: Summary,
    pub rounded_closed_mean: f64,
    pub repairs_mean: f64,
    /// Fraction of repeats whose raw draw passed the sandwich check.
    pub sandwich_pass_rate: Option<f64>,
    pub rng: String,
    pub rounding_seeds: Vec<u64>,
    pub optimum: Option<Optimum>,
    /// SHA-256 over every field except `timing` and this one.
    pub record_digest: String,
    pub timing: Timing,
}

impl RunRecord {
    fn finite_fields(&self) -> Vec<(&'static str, f64)> {
        let c = &self.certificate;
        let mut v = vec![
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("fractional_phi", self.fractional_phi),
            ("certificate.gap", c.gap),
            ("certificate.tau", c.tau),
            ("certificate.phi_value", c.phi_value),
            ("rounded_phi.mean", self.rounded_phi.mean),
            ("rounded_phi.min", self.rounded_phi.min),
            ("rounded_phi.max", self.rounded_phi.max),
            ("rounded_closed_mean", self.rounded_closed_mean),
            ("repairs_mean", self.repairs_mean),
            ("timing.total_secs", self.timing.total_secs),
        ];
        if let Some(b) = c.bound_factor {
            v.push(("certificate.bound_factor", b));
        }
        if let Some(r) = self.sandwich_pass_rate {
            v.push(("sandwich_pass_rate", r));
        }
        if let Some(o) = &self.optimum {
            v.extend([
                ("optimum.best_phi", o.best_phi),
                ("optimum.fractional_gap", o.fractional_gap),
                ("optimum.rounded_gap", o.rounded_gap),
            ]);
        }
        v
    }

    /// Digest of the record with timing removed.
    pub fn compute_digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("records serialize");
        let map = value.as_object_mut().expect("records serialize to objects");
        map.remove("timing");
        map.remove("record_digest");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}

struct RoundOutcome {
    phi: f64,
    closed: usize,
    repairs: usize,
    sandwich: Option<bool>,
}

/// Runs the full pipeline on one instance.
pub fn run_instance(
    inst: &Instance,
    seed: u64,
    cfg: &ExperimentConfig,
    instance_secs: f64,
) -> CliResult<RunRecord> {
    let start = Instant::now();
    let (g, d, q) = (&inst.graph, &inst.demand, inst.q);
    let solver = cfg.solver();

    let outcome = frank_wolfe::run(g, d, &cfg.fw(q))?;
    let solve_secs = start.elapsed().as_secs_f64();
    let solver_iterations = outcome
        .trace
        .records
        .iter()
        .map(|r| r.solver_iterations)
        .sum();

    let round_start = Instant::now();
    let sbar = rounding::floor_probabilities(&outcome.s, g, &cfg.rounding(0))?;
    let seeds: Vec<u64> = (0..cfg.repeats).map(|k| repeat_seed(seed, k)).collect();
    let rounds: Vec<RoundOutcome> = seeds
        .par_iter()
        .map(|&s| -> CliResult<RoundOutcome> {
            let report = rounding::sample(&sbar, g, q, &cfg.rounding(s))?;
            Ok(RoundOutcome {
                phi: congestion::phi(g, &report.sampled.to_switches(), d, &solver)?,
                closed: report.sampled.closed_count(),
                repairs: report.repairs.len(),
                sandwich: report.sandwich_checked,
            })
        })
        .collect::<CliResult<_>>()?;
    let rounding_secs = round_start.elapsed().as_secs_f64();

    let phis: Vec<f64> = rounds.iter().map(|r| r.phi).collect();
    let rounded_phi = Summary::of(&phis);
    let k = cfg.repeats as f64;
    let sandwich_pass_rate = cfg
        .check_sandwich
        .then(|| rounds.iter().filter(|r| r.sandwich == Some(true)).count() as f64 / k);

    let enum_start = Instant::now();
    let optimum =
        if cfg.enumerate && g.free_count() <= ENUMERATION_CAP && g.n() <= dense::DENSE_LIMIT {
            let res = oracle::enumerate_optimal(g, d, q)?;
            let ratio = |x: f64| {
                if res.best_phi > 0.0 {
                    x / res.best_phi - 1.0
                } else {
                    0.0
                }
            };
            Some(Optimum {
                best_phi: res.best_phi,
                evaluated: res.evaluated_count,
                fractional_gap: ratio(outcome.certificate.phi_value),
                rounded_gap: ratio(rounded_phi.min),
            })
        } else {
            None
        };
    let enumeration_secs = enum_start.elapsed().as_secs_f64();

    let mut record = RunRecord {
        schema_version: SCHEMA_VERSION,
        instance_digest: instance_digest(inst),
        seed,
        n: g.n(),
        m: g.m(),
        q,
        backbone_len: g.backbone_len(),
        alpha: cfg.alpha,
        delta: cfg.delta,
        fractional_phi: outcome.certificate.phi_value,
        certificate: outcome.certificate,
        iterations: outcome.iterations,
        solver_iterations,
        repeats: cfg.repeats,
        rounded_phi,
        rounded_closed_mean: rounds.iter().map(|r| r.closed as f64).sum::<f64>() / k,
        repairs_mean: rounds.iter().map(|r| r.repairs as f64).sum::<f64>() / k,
        sandwich_pass_rate,
        rng: RNG_ALGORITHM.to_string(),
        rounding_seeds: seeds,
        optimum,
        record_digest: String::new(),
        timing: Timing {
            instance_secs,
            solve_secs,
            per_iteration_secs: solve_secs / outcome.iterations.max(1) as f64,
            rounding_secs,
            enumeration_secs,
            total_secs: instance_secs + start.elapsed().as_secs_f64(),
        },
    };
    if let Some((name, x)) = record
        .finite_fields()
        .into_iter()
        .find(|(_, x)| !x.is_finite())
    {
        return Err(randswitch::Error::Numerical(format!("record field {name} is {x}")).into());
    }
    record.record_digest = record.compute_digest();
    Ok(record)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<Vec<RunRecord>> {
    cfg.validate()?;
    cfg.instances()?
        .iter()
        .map(|(inst, seed, secs)| run_instance(inst, *seed, cfg, *secs))
        .collect()
}

/// Flat CSV row; shares its numeric fields with the JSON record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub q: usize,
    pub alpha: f64,
    pub delta: f64,
    pub fractional_phi: f64,
    pub gap: f64,
    pub tau: f64,
    pub certified: bool,
    pub iterations: usize,
    pub solver_iterations: usize,
    pub repeats: usize,
    pub rounded_phi_mean: f64,
    pub rounded_phi_min: f64,
    pub rounded_phi_max: f64,
    pub best_phi: Option<f64>,
    pub solve_secs: f64,
    pub per_iteration_secs: f64,
    pub rounding_secs: f64,
    pub total_secs: f64,
    pub instance_digest: String,
    pub record_digest: String,
}

impl From<&RunRecord> for CsvRow {
    fn from(r: &RunRecord) -> Self {
        CsvRow {
            seed: r.seed,
            n: r.n,
            m: r.m,
            q: r.q,
            alpha: r.alpha,
            delta: r.delta,
            fractional_phi: r.fractional_phi,
            gap: r.certificate.gap,
            tau: r.certificate.tau,
            certified: r.certificate.certified,
            iterations: r.iterations,
            solver_iterations: r.solver_iterations,
            repeats: r.repeats,
            rounded_phi_mean: r.rounded_phi.mean,
            rounded_phi_min: r.rounded_phi.min,
            rounded_phi_max: r.rounded_phi.max,
            best_phi: r.optimum.map(|o| o.best_phi),
            solve_secs: r.timing.solve_secs,
            per_iteration_secs: r.timing.per_iteration_secs,
            rounding_secs: r.timing.rounding_secs,
            total_secs: r.timing.total_secs,
            instance_digest: r.instance_digest.clone(),
            record_digest: r.record_digest.clone(),
        }
    }
}

pub fn records_json(records: &[RunRecord]) -> String {
    let mut s = serde_json::to_string_pretty(records).expect("records serialize");
    s.push('\n');
    s
}

pub fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| CliError::format("csv output", e))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::format("csv output", e))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn records_csv(records: &[RunRecord]) -> CliResult<String> {
    to_csv(records.iter().map(CsvRow::from))
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes the records to the configured paths.
pub fn write_outputs(cfg: &ExperimentConfig, records: &[RunRecord]) -> CliResult<()> {
    if let Some(p) = &cfg.output_json {
        write_file(p, &records_json(records))?;
    }
    if let Some(p) = &cfg.output_csv {
        write_file(p, &records_csv(records)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            n: 6,
            extra_edges: 6,
            repeats: 5,
            enumerate: true,
            seed: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("repeats = 0").is_err());
        assert!(ExperimentConfig::from_toml("alpha = 1.5").is_err());
    }

    #[test]
    fn tiny_instance_reports_optimality_gap() {
        let records = run_experiment(&tiny()).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        let opt = r.optimum.unwrap();
        assert!(opt.best_phi > 0.0);
        assert!(opt.rounded_gap >= -1e-9);
        if r.certificate.certified {
            assert!(opt.fractional_gap <= r.alpha + 1e-9);
        }
        assert_eq!(r.rounding_seeds.len(), 5);
        assert_eq!(r.record_digest, r.compute_digest());
    }

    #[test]
    fn repeat_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..100).map(|k| repeat_seed(9, k)).collect();
        assert_eq!(seeds.len(), 100);
    }

    #[test]
    fn sweep_uses_one_seed_per_size() {
        let cfg = ExperimentConfig {
            sweep: vec![20, 40],
            repeats: 1,
            ..ExperimentConfig::default()
        };
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(
            records
                .iter()
                .map(|r| (r.n, r.m, r.seed))
                .collect::<Vec<_>>(),
            vec![(20, 59, 0), (40, 119, 1)]
        );
    }
}
