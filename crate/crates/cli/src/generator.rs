//! Random instances: a random-attachment spanning tree as backbone, extra
//! candidate edges drawn uniformly, and a unit-norm demand vector.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use randswitch::io::Instance;
use randswitch::rounding::rng_stream;
use randswitch::{DemandVector, Edge, Error, Graph, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DemandKind {
    /// `(e_a - e_b) / sqrt(2)` for a random pair `a != b`.
    #[default]
    Pair,
    /// Standard normal entries projected to zero sum.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    pub extra_edges: usize,
    pub weight_lo: f64,
    pub weight_hi: f64,
    pub demand: DemandKind,
    /// Allows extra edges parallel to existing ones.
    pub multigraph: bool,
    /// Defaults to the backbone plus half of the extra edges.
    pub q: Option<usize>,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(n: usize, extra_edges: usize, seed: u64) -> Self {
        GeneratorSpec {
            n,
            extra_edges,
            weight_lo: 0.5,
            weight_hi: 2.0,
            demand: DemandKind::Pair,
            multigraph: false,
            q: None,
            seed,
        }
    }

    pub fn budget(&self) -> usize {
        self.q
            .unwrap_or(self.n.saturating_sub(1) + self.extra_edges.div_ceil(2))
    }
}

fn pair_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Decodes `k` in `0..n(n-1)/2` to the `k`-th pair `(i, j)`, `i < j`, in
/// row-major order.
fn unrank_pair(n: usize, mut k: usize) -> (usize, usize) {
    let mut i = 0;
    while k >= n - 1 - i {
        k -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + k)
}

pub fn generate_instance(spec: &GeneratorSpec) -> Result<Instance> {
    let n = spec.n;
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "generator needs n >= 2, got {n}"
        )));
    }
    if !(spec.weight_lo > 0.0 && spec.weight_lo <= spec.weight_hi && spec.weight_hi.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "weight range [{}, {}] must be positive and ordered",
            spec.weight_lo, spec.weight_hi
        )));
    }
    let capacity = n * (n - 1) / 2 - (n - 1);
    if !spec.multigraph && spec.extra_edges > capacity {
        return Err(Error::InvalidConfig(format!(
            "{} extra edges exceed the {capacity} free pairs of a simple graph on {n} nodes",
            spec.extra_edges
        )));
    }
    let mut rng = rng_stream(spec.seed, 0);

    let mut label: Vec<usize> = (0..n).collect();
    label.shuffle(&mut rng);
    let mut pairs = Vec::with_capacity(n - 1 + spec.extra_edges);
    for v in 1..n {
        let parent = rng.random_range(0..v);
        pairs.push(pair_key(label[v], label[parent]));
    }

    if spec.multigraph {
        for _ in 0..spec.extra_edges {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            pairs.push(pair_key(a, b));
        }
    } else {
        let mut used: HashSet<(usize, usize)> = pairs.iter().copied().collect();
        if 2 * spec.extra_edges <= capacity {
            while pairs.len() < n - 1 + spec.extra_edges {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                if a != b && used.insert(pair_key(a, b)) {
                    pairs.push(pair_key(a, b));
                }
            }
        } else {
            // Dense request: choose among the explicit complement.
            let all = n * (n - 1) / 2;
            let free: Vec<(usize, usize)> = (0..all)
                .map(|k| unrank_pair(n, k))
                .filter(|p| !used.contains(p))
                .collect();
            for k in index::sample(&mut rng, free.len(), spec.extra_edges) {
                used.insert(free[k]);
                pairs.push(free[k]);
            }
        }
    }

    let weights = Uniform::new_inclusive(spec.weight_lo, spec.weight_hi)
        .map_err(|e| Error::InvalidConfig(format!("weight distribution: {e}")))?;
    let edges: Vec<Edge> = pairs
        .iter()
        .map(|&(a, b)| Edge::new(a, b, weights.sample(&mut rng)))
        .collect();
    let graph = Graph::new(n, edges, (0..n - 1).collect())?;

    let raw = match spec.demand {
        DemandKind::Pair => {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            DemandVector::pair(n, a, b)
        }
        DemandKind::Gaussian => {
            let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            DemandVector::centered(v)
        }
    };
    let norm = raw.norm2();
    let demand = DemandVector::new(raw.scaled(1.0 / norm).into_inner())?;
    let q = spec.budget();
    Ok(Instance { graph, demand, q })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unrank_enumerates_row_major() {
        let got: Vec<_> = (0..6).map(|k| unrank_pair(4, k)).collect();
        assert_eq!(got, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn two_nodes_without_extras() {
        let inst = generate_instance(&GeneratorSpec::new(2, 0, 7)).unwrap();
        assert_eq!(inst.graph.m(), 1);
        assert_eq!(inst.graph.backbone(), &[0]);
        assert!((inst.demand.norm2() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complete_graph_request() {
        let inst = generate_instance(&GeneratorSpec::new(6, 10, 1)).unwrap();
        assert_eq!(inst.graph.m(), 15);
        let mut seen: Vec<_> = inst.graph.edges().iter().map(|e| (e.u, e.v)).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 15);
        assert!(generate_instance(&GeneratorSpec::new(6, 11, 1)).is_err());
    }
}
