//! Frank–Wolfe over `{s in [0,1]^m : s_T = 1, ||s||_1 <= q}` with gap
//! certificates.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::congestion::{self, DiffResult, DiffWorkspace};
use crate::error::{check_len, Error, Result};
use crate::graph::{DemandVector, Graph, SwitchVector};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `eta_t = 2/(t+2)`, always accepted.
    Classic,
    /// Classic step, rejected when it would increase `phi`.
    #[default]
    MonotoneGuard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwConfig {
    pub q: usize,
    pub alpha: f64,
    pub max_iterations: usize,
    pub step_rule: StepRule,
    pub solver: SolverConfig,
}

impl FwConfig {
    pub fn new(q: usize, alpha: f64) -> Self {
        FwConfig {
            q,
            alpha,
            max_iterations: 1000,
            step_rule: StepRule::default(),
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self, g: &Graph) -> Result<()> {
        if self.q < g.backbone_len() {
            return Err(Error::InvalidConfig(format!(
                "budget q = {} is below the backbone size {}",
                self.q,
                g.backbone_len()
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub gap: f64,
    pub tau: f64,
    pub phi_value: f64,
    pub certified: bool,
    /// `1 + alpha` when certified.
    pub bound_factor: Option<f64>,
}

impl Certificate {
    pub fn from_gap(gap: f64, phi_value: f64, alpha: f64) -> Self {
        let tau = alpha / (1.0 + alpha);
        let certified = gap <= tau * phi_value;
        Certificate {
            gap,
            tau,
            phi_value,
            certified,
            bound_factor: certified.then(|| 1.0 / (1.0 - tau)),
        }
    }

    /// `phi - gap`, a lower bound on the relaxed (and integral) optimum.
    pub fn lower_bound(&self) -> f64 {
        (self.phi_value - self.gap).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwRecord {
    pub iteration: usize,
    pub phi: f64,
    pub gap: f64,
    /// Step size applied after this record; zero once certified.
    pub step: f64,
    pub l1: f64,
    pub elapsed_secs: f64,
    /// False when the guard rejected the step taken from this iterate.
    pub accepted: bool,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FwTrace {
    pub records: Vec<FwRecord>,
}

#[derive(Debug, Clone)]
pub struct FwOutcome {
    pub s: SwitchVector,
    pub certificate: Certificate,
    pub trace: FwTrace,
    /// Voltages at `s`.
    pub voltages: Vec<f64>,
    /// Steps taken (accepted or rejected) before stopping.
    pub iterations: usize,
}

/// Vertex minimizing `<grad, v>`: the backbone plus the `q - |T|` free edges
/// with the most negative gradient, ties to the lower index.
pub fn lmo_top_q(grad: &[f64], g: &Graph, q: usize) -> Result<Vec<f64>> {
    check_len("gradient", grad.len(), g.m())?;
    if q < g.backbone_len() {
        return Err(Error::InvalidConfig(format!(
            "budget q = {q} is below the backbone size {}",
            g.backbone_len()
        )));
    }
    let mut v = SwitchVector::backbone(g).into_inner();
    let mut free: Vec<usize> = g.free_edges().collect();
    let k = (q - g.backbone_len()).min(free.len());
    if k < free.len() {
        free.select_nth_unstable_by(k, |&a, &b| grad[a].total_cmp(&grad[b]).then(a.cmp(&b)));
    }
    for &e in &free[..k] {
        v[e] = 1.0;
    }
    Ok(v)
}

/// `<grad, s - v>`.
pub fn fw_gap(grad: &[f64], s: &[f64], v: &[f64]) -> f64 {
    grad.iter()
        .zip(s)
        .zip(v)
        .map(|((g, a), b)| g * (a - b))
        .sum()
}

/// Gap certificate at `s`.
pub fn certificate(g: &Graph, s: &[f64], d: &DemandVector, cfg: &FwConfig) -> Result<Certificate> {
    cfg.validate(g)?;
    let diff = congestion::approx_diff(g, s, d, &cfg.solver)?;
    let v = lmo_top_q(&diff.grad, g, cfg.q)?;
    Ok(Certificate::from_gap(
        fw_gap(&diff.grad, s, &v),
        diff.phi,
        cfg.alpha,
    ))
}

/// `ceil(2 L D^2 / alpha)` with `D^2 = 2 (q - |T|)`.
pub fn iteration_bound(smoothness: f64, q: usize, backbone_len: usize, alpha: f64) -> usize {
    let d2 = 2.0 * q.saturating_sub(backbone_len) as f64;
    (2.0 * smoothness * d2 / alpha).ceil() as usize
}

/// Runs Frank–Wolfe from the backbone indicator.
pub fn run(g: &Graph, d: &DemandVector, cfg: &FwConfig) -> Result<FwOutcome> {
    run_from(g, d, cfg, SwitchVector::backbone(g))
}

/// Runs Frank–Wolfe from a feasible starting point.
pub fn run_from(
    g: &Graph,
    d: &DemandVector,
    cfg: &FwConfig,
    s0: SwitchVector,
) -> Result<FwOutcome> {
    cfg.validate(g)?;
    check_len("demand vector", d.len(), g.n())?;
    check_len("switch vector", s0.len(), g.m())?;
    if s0.l1_norm() > cfg.q as f64 + 1e-9 {
        return Err(Error::InvalidInput(format!(
            "starting point has l1 norm {} above budget {}",
            s0.l1_norm(),
            cfg.q
        )));
    }
    let start = Instant::now();
    // Work on a copy relabeled for memory locality; edge order is unchanged.
    let label = g.locality_labels();
    let original = g;
    let g = &g.relabeled(&label);
    let mut permuted = vec![0.0; d.len()];
    for (v, &x) in d.iter().enumerate() {
        permuted[label[v]] = x;
    }
    let d = &DemandVector::new(permuted)?;
    let restore = |x: &[f64]| -> Vec<f64> { label.iter().map(|&l| x[l]).collect() };
    debug_assert_eq!(original.m(), g.m());

    let workspace = DiffWorkspace::new(g)?;
    let mut s = s0.into_inner();
    let mut diff = workspace.diff(g, &s, d, &cfg.solver, None)?;
    let mut trace = FwTrace::default();
    // Best iterate under the classic rule, which may increase phi.
    let mut best: Option<(Vec<f64>, DiffResult, f64)> = None;
    let mut t = 0;

    loop {
        let v = lmo_top_q(&diff.grad, g, cfg.q)?;
        let gap = fw_gap(&diff.grad, &s, &v);
        let cert = Certificate::from_gap(gap, diff.phi, cfg.alpha);
        if best.as_ref().is_none_or(|b| diff.phi <= b.1.phi) {
            best = Some((s.clone(), diff.clone(), gap));
        }
        let mut record = FwRecord {
            iteration: t,
            phi: diff.phi,
            gap,
            step: 0.0,
            l1: s.iter().sum(),
            elapsed_secs: start.elapsed().as_secs_f64(),
            accepted: true,
            solver_iterations: diff.solver_iterations,
        };
        if cert.certified || t >= cfg.max_iterations {
            trace.records.push(record);
            if cert.certified {
                return Ok(FwOutcome {
                    s: SwitchVector::from_vec_unchecked(s),
                    certificate: cert,
                    trace,
                    voltages: restore(&diff.voltages),
                    iterations: t,
                });
            }
            break;
        }

        let eta = 2.0 / (t as f64 + 2.0);
        let mut next: Vec<f64> = s
            .iter()
            .zip(&v)
            .map(|(a, b)| (1.0 - eta) * a + eta * b)
            .collect();
        for &e in g.backbone() {
            next[e] = 1.0;
        }
        let next_diff = workspace.diff(g, &next, d, &cfg.solver, Some(&diff.voltages))?;
        record.step = eta;
        if cfg.step_rule == StepRule::MonotoneGuard && next_diff.phi > diff.phi {
            record.accepted = false;
        } else {
            s = next;
            diff = next_diff;
        }
        trace.records.push(record);
        t += 1;
    }

    let (s, diff, gap) = best.expect("at least one iterate evaluated");
    Ok(FwOutcome {
        s: SwitchVector::from_vec_unchecked(s),
        certificate: Certificate::from_gap(gap, diff.phi, cfg.alpha),
        trace,
        voltages: restore(&diff.voltages),
        iterations: t,
    })
}

/// `max(||u||_1, q ||u||_inf)`.
pub fn hexagon_norm(u: &[f64], q: usize) -> f64 {
    let l1: f64 = u.iter().map(|x| x.abs()).sum();
    let linf = u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    l1.max(q as f64 * linf)
}

/// Average of the `q` largest magnitudes, padding with zeros.
pub fn hexagon_dual_norm(u: &[f64], q: usize) -> f64 {
    assert!(q >= 1, "hexagon dual norm needs q >= 1");
    let mut mags: Vec<f64> = u.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.iter().take(q).sum::<f64>() / q as f64
}

/// Gradient-change ratios between two switch vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessSample {
    /// `||grad(s) - grad(s')||_2 / ||s - s'||_2`.
    pub euclidean: f64,
    /// Dual hexagon norm of the gradient change over the hexagon norm of `s - s'`.
    pub hexagon: f64,
    pub max_phi: f64,
}

/// Exact-gradient smoothness ratios for one pair of points.
pub fn smoothness_sample(
    g: &Graph,
    d: &DemandVector,
    s: &[f64],
    s2: &[f64],
    q: usize,
) -> Result<SmoothnessSample> {
    let a = congestion::exact_diff(g, s, d)?;
    let b = congestion::exact_diff(g, s2, d)?;
    let dg: Vec<f64> = a.grad.iter().zip(&b.grad).map(|(x, y)| x - y).collect();
    let ds: Vec<f64> = s.iter().zip(s2).map(|(x, y)| x - y).collect();
    let norm2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(SmoothnessSample {
        euclidean: norm2(&dg) / norm2(&ds),
        hexagon: hexagon_dual_norm(&dg, q) / hexagon_norm(&ds, q),
        max_phi: a.phi.max(b.phi),
    })
}
