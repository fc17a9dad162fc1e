//! Exhaustive enumeration of budget-feasible binary configurations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{check_len, Error, Result};
use crate::graph::{Configuration, DemandVector, Graph};

/// Largest number of free edges enumerated.
pub const ENUMERATION_CAP: usize = 22;

/// Largest number of free edges for which every value is retained.
pub const ALL_VALUES_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationResult {
    pub best_config: Configuration,
    pub best_phi: f64,
    pub evaluated_count: usize,
    /// Keyed by bitmask over the free edges in index order.
    pub all_values: Option<BTreeMap<u64, f64>>,
}

/// Configuration for a bitmask whose bit `k` closes the `k`-th free edge.
pub fn config_from_mask(g: &Graph, free: &[usize], mask: u64) -> Configuration {
    let mut c = Configuration::backbone(g);
    for (k, &e) in free.iter().enumerate() {
        if mask >> k & 1 == 1 {
            c.sbin[e] = true;
        }
    }
    c
}

fn phi_of(g: &Graph, d: &DemandVector, s: &[f64]) -> Result<f64> {
    if d.is_zero() {
        return Ok(0.0);
    }
    let l = dense::dense_laplacian(g, s)?;
    let x = dense::exact_pinv_apply(&l, d)?;
    Ok(d.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().max(0.0))
}

/// Minimum of `phi` over binary `s` with the backbone closed and at most
/// `q` closed edges. Ties go to the smallest bitmask.
pub fn enumerate_optimal(g: &Graph, d: &DemandVector, q: usize) -> Result<EnumerationResult> {
    check_len("demand vector", d.len(), g.n())?;
    dense::ensure_dense(g.n())?;
    let t = g.backbone_len();
    if q < t {
        return Err(Error::InvalidConfig(format!(
            "budget q = {q} is below the backbone size {t}"
        )));
    }
    let free: Vec<usize> = g.free_edges().collect();
    if free.len() > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            free: free.len(),
            cap: ENUMERATION_CAP,
        });
    }
    let extra = q - t;
    let keep_all = free.len() <= ALL_VALUES_CAP;
    let mut all = BTreeMap::new();
    let mut best: Option<(u64, f64)> = None;
    let mut evaluated = 0;
    let mut s = vec![0.0; g.m()];
    for &e in g.backbone() {
        s[e] = 1.0;
    }
    for mask in 0u64..(1u64 << free.len()) {
        if mask.count_ones() as usize > extra {
            continue;
        }
        for (k, &e) in free.iter().enumerate() {
            s[e] = (mask >> k & 1) as f64;
        }
        let value = phi_of(g, d, &s)?;
        evaluated += 1;
        if keep_all {
            all.insert(mask, value);
        }
        if best.is_none_or(|(_, b)| value < b) {
            best = Some((mask, value));
        }
    }
    let (mask, best_phi) = best.expect("the backbone configuration is always feasible");
    Ok(EnumerationResult {
        best_config: config_from_mask(g, &free, mask),
        best_phi,
        evaluated_count: evaluated,
        all_values: keep_all.then_some(all),
    })
}

/// Exact `phi` for each configuration.
pub fn exact_phi_all(g: &Graph, d: &DemandVector, configs: &[Configuration]) -> Result<Vec<f64>> {
    check_len("demand vector", d.len(), g.n())?;
    dense::ensure_dense(g.n())?;
    configs
        .iter()
        .map(|c| {
            check_len("configuration", c.sbin.len(), g.m())?;
            phi_of(g, d, &c.to_switches())
        })
        .collect()
}
