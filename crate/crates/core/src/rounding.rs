//! Randomized rounding of fractional switch vectors into configurations.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{check_len, Error, Result};
use crate::graph::{Configuration, Graph};

/// Identifier of the random generator, recorded in every report.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Slack on the pencil eigenvalue interval.
const SANDWICH_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RepairMode {
    #[default]
    TrimAndFill,
    Resample,
    Shrinkage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundingParams {
    pub delta: f64,
    pub p_min_constant: f64,
    pub repair: RepairMode,
    pub max_resamples: usize,
    pub rng_seed: u64,
    /// Computes the sandwich bound and tests the raw draw against it
    /// (dense path).
    pub check_sandwich: bool,
}

impl Default for RoundingParams {
    fn default() -> Self {
        RoundingParams {
            delta: 0.1,
            p_min_constant: 0.0,
            repair: RepairMode::default(),
            max_resamples: 64,
            rng_seed: 0,
            check_sandwich: false,
        }
    }
}

impl RoundingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.p_min_constant >= 0.0 && self.p_min_constant.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "p_min constant must be finite and nonnegative, got {}",
                self.p_min_constant
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairAction {
    Removed,
    Added,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repair {
    pub edge: usize,
    pub action: RepairAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichEpsilon {
    pub epsilon: f64,
    /// `epsilon >= 1`: the two-sided bound says nothing.
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingReport {
    pub sbar: Vec<f64>,
    pub sampled: Configuration,
    /// Closed edges in the last draw, before any repair.
    pub raw_closed: usize,
    pub resamples_used: usize,
    pub repairs: Vec<Repair>,
    pub epsilon_bound: Option<SandwichEpsilon>,
    /// Whether the last raw draw satisfies the spectral sandwich.
    pub sandwich_checked: Option<bool>,
    pub rng: String,
    pub seed: u64,
}

/// Generator for `(seed, stream)`; streams are independent.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `C ln(n / delta) / n`, clamped to `[0, 1]`.
pub fn p_min(n: usize, delta: f64, c: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    (c * (n as f64 / delta).ln() / n as f64).clamp(0.0, 1.0)
}

/// `sbar_e = 1` on the backbone and `max(s_e, p_min)` elsewhere.
pub fn floor_probabilities(s: &[f64], g: &Graph, params: &RoundingParams) -> Result<Vec<f64>> {
    check_len("switch vector", s.len(), g.m())?;
    params.validate()?;
    let floor = p_min(g.n(), params.delta, params.p_min_constant);
    Ok(s.iter()
        .enumerate()
        .map(|(e, &x)| {
            if g.is_backbone(e) {
                1.0
            } else {
                x.max(floor).min(1.0)
            }
        })
        .collect())
}

/// One independent Bernoulli draw per edge; one uniform is consumed per edge.
pub fn bernoulli_draw<R: Rng>(probs: &[f64], g: &Graph, rng: &mut R) -> Vec<bool> {
    probs
        .iter()
        .enumerate()
        .map(|(e, &p)| {
            let u: f64 = rng.random();
            g.is_backbone(e) || u < p
        })
        .collect()
}

/// Scales free probabilities by `theta` so that a draw exceeds `q` edges
/// with probability at most `delta`.
pub fn shrinkage(s: &[f64], g: &Graph, q: usize, delta: f64) -> Result<Vec<f64>> {
    check_len("switch vector", s.len(), g.m())?;
    let t = g.backbone_len();
    if q <= t {
        return Err(Error::InvalidConfig(format!(
            "shrinkage needs q > |T| (q = {q}, |T| = {t})"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let slack = q - t;
    let gamma = shrinkage_gamma(slack, delta);
    if gamma > slack as f64 {
        return Err(Error::InfeasibleShrinkage { gamma, slack });
    }
    let free_mass: f64 = g.free_edges().map(|e| s[e]).sum();
    let room = slack as f64 - gamma;
    let theta = if free_mass <= room {
        1.0
    } else {
        room / free_mass
    };
    Ok(s.iter()
        .enumerate()
        .map(|(e, &x)| if g.is_backbone(e) { 1.0 } else { theta * x })
        .collect())
}

/// `sqrt(2 (q - |T|) ln(1/delta))`.
pub fn shrinkage_gamma(slack: usize, delta: f64) -> f64 {
    (2.0 * slack as f64 * (1.0 / delta).ln()).sqrt()
}

/// `sqrt(3) sqrt(2 w_max ln((n-1)/delta) / lambda_2(L_sbar))`.
pub fn sandwich_epsilon(g: &Graph, sbar: &[f64], delta: f64) -> Result<SandwichEpsilon> {
    check_len("probability vector", sbar.len(), g.m())?;
    dense::ensure_dense(g.n())?;
    let lambda2 = dense::lambda2(&dense::dense_laplacian(g, sbar)?)?;
    if !(lambda2 > 0.0) {
        return Err(Error::Structural(
            "probability support is disconnected".into(),
        ));
    }
    let n = g.n() as f64;
    let r = 2.0 * g.max_weight();
    let epsilon = 3f64.sqrt() * (r * ((n - 1.0) / delta).ln() / lambda2).sqrt();
    Ok(SandwichEpsilon {
        epsilon,
        vacuous: epsilon >= 1.0,
    })
}

/// Generalized eigenvalues of `(L_stilde, L_sbar)` on the complement of
/// the all-ones vector, ascending.
pub fn pencil_eigenvalues(g: &Graph, sbar: &[f64], sampled: &[bool]) -> Result<Vec<f64>> {
    check_len("probability vector", sbar.len(), g.m())?;
    check_len("configuration", sampled.len(), g.m())?;
    dense::ensure_dense(g.n())?;
    let n = g.n();
    if n < 2 {
        return Ok(Vec::new());
    }
    let lbar = dense::dense_laplacian(g, sbar)?;
    let stilde: Vec<f64> = sampled.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let ltilde = dense::dense_laplacian(g, &stilde)?;
    let eig = nalgebra::SymmetricEigen::try_new(lbar, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver failed".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    // Drop the null direction; scale the remaining eigenvectors by lambda^{-1/2}.
    let mut basis = DMatrix::zeros(n, n - 1);
    for (k, &i) in order[1..].iter().enumerate() {
        let lam = eig.eigenvalues[i];
        if !(lam > 0.0) {
            return Err(Error::Structural(
                "probability support is disconnected".into(),
            ));
        }
        basis.set_column(k, &(eig.eigenvectors.column(i) / lam.sqrt()));
    }
    let reduced = basis.transpose() * ltilde * &basis;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    dense::sorted_eigenvalues(&reduced)
}

/// True when every pencil eigenvalue lies in `[1 - eps, 1 + eps]`.
pub fn sandwich_check(g: &Graph, sbar: &[f64], sampled: &[bool], epsilon: f64) -> Result<bool> {
    let ev = pencil_eigenvalues(g, sbar, sampled)?;
    Ok(ev
        .iter()
        .all(|&x| x >= 1.0 - epsilon - SANDWICH_SLACK && x <= 1.0 + epsilon + SANDWICH_SLACK))
}

/// Removes closed free edges with the smallest `sbar` until `target` edges
/// remain, or closes open edges with the largest `sbar` until `target` is
/// reached. Ties go to the lower index.
fn trim_and_fill(sbin: &mut [bool], sbar: &[f64], g: &Graph, target: usize) -> Vec<Repair> {
    let count = sbin.iter().filter(|&&b| b).count();
    let mut repairs = Vec::new();
    if count > target {
        let mut on: Vec<usize> = (0..sbin.len())
            .filter(|&e| sbin[e] && !g.is_backbone(e))
            .collect();
        on.sort_by(|&a, &b| sbar[a].total_cmp(&sbar[b]).then(a.cmp(&b)));
        for &e in on.iter().take(count - target) {
            sbin[e] = false;
            repairs.push(Repair {
                edge: e,
                action: RepairAction::Removed,
            });
        }
    } else if count < target {
        let mut off: Vec<usize> = (0..sbin.len()).filter(|&e| !sbin[e]).collect();
        off.sort_by(|&a, &b| sbar[b].total_cmp(&sbar[a]).then(a.cmp(&b)));
        for &e in off.iter().take(target - count) {
            sbin[e] = true;
            repairs.push(Repair {
                edge: e,
                action: RepairAction::Added,
            });
        }
    }
    repairs
}

/// Draws a configuration from `sbar` and repairs it to the budget.
pub fn sample(
    sbar: &[f64],
    g: &Graph,
    q: usize,
    params: &RoundingParams,
) -> Result<RoundingReport> {
    check_len("probability vector", sbar.len(), g.m())?;
    params.validate()?;
    if q < g.backbone_len() {
        return Err(Error::InvalidConfig(format!(
            "budget q = {q} is below the backbone size {}",
            g.backbone_len()
        )));
    }
    if let Some(e) = sbar.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidInput(format!(
            "probability {e} = {} outside [0, 1]",
            sbar[e]
        )));
    }
    let mut rng = rng_stream(params.rng_seed, 0);
    let mut resamples_used = 0;
    let mut repairs = Vec::new();

    let (raw, probs) = match params.repair {
        RepairMode::TrimAndFill => (bernoulli_draw(sbar, g, &mut rng), sbar.to_vec()),
        RepairMode::Resample => {
            let mut draw = bernoulli_draw(sbar, g, &mut rng);
            while draw.iter().filter(|&&b| b).count() > q {
                if resamples_used == params.max_resamples {
                    let count = draw.iter().filter(|&&b| b).count();
                    return Err(Error::ResampleExhausted {
                        attempts: resamples_used + 1,
                        count,
                        q,
                        last: draw,
                    });
                }
                resamples_used += 1;
                draw = bernoulli_draw(sbar, g, &mut rng);
            }
            (draw, sbar.to_vec())
        }
        RepairMode::Shrinkage => {
            let shrunk = shrinkage(sbar, g, q, params.delta)?;
            (bernoulli_draw(&shrunk, g, &mut rng), shrunk)
        }
    };
    let raw_closed = raw.iter().filter(|&&b| b).count();
    let mut sbin = raw.clone();
    match params.repair {
        RepairMode::TrimAndFill => {
            repairs = trim_and_fill(&mut sbin, sbar, g, q.min(g.m()));
        }
        RepairMode::Shrinkage if raw_closed > q => {
            repairs = trim_and_fill(&mut sbin, &probs, g, q);
        }
        _ => {}
    }

    let (epsilon_bound, sandwich_checked) = if params.check_sandwich {
        let eps = sandwich_epsilon(g, &probs, params.delta)?;
        let ok = sandwich_check(g, &probs, &raw, eps.epsilon)?;
        (Some(eps), Some(ok))
    } else {
        (None, None)
    };

    Ok(RoundingReport {
        sbar: probs,
        sampled: Configuration::new(sbin),
        raw_closed,
        resamples_used,
        repairs,
        epsilon_bound,
        sandwich_checked,
        rng: RNG_ALGORITHM.to_string(),
        seed: params.rng_seed,
    })
}
