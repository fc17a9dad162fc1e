//! Instance builders and an SVD-based pseudoinverse oracle shared by the
//! integration tests. The oracle assembles its own Laplacian so that it does
//! not share code with the library's dense path.

#![allow(dead_code)]

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use randswitch::{DemandVector, Edge, Graph};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random-attachment backbone (edges `0..n-1`) plus `extra` random edges,
/// parallel edges allowed. Weights are uniform in `[0.5, 2]`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Graph {
    let mut edges = Vec::with_capacity(n - 1 + extra);
    for v in 1..n {
        edges.push(Edge::new(
            v,
            rng.random_range(0..v),
            rng.random_range(0.5..2.0),
        ));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        edges.push(Edge::new(a, b, rng.random_range(0.5..2.0)));
    }
    Graph::new(n, edges, (0..n - 1).collect()).unwrap()
}

/// Gaussian-like demand projected to zero sum and scaled to unit norm.
pub fn random_demand(rng: &mut ChaCha8Rng, n: usize) -> DemandVector {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let d = DemandVector::centered(raw);
    let norm = d.norm2();
    d.scaled(1.0 / norm)
}

/// Backbone pinned at 1, free entries uniform in `[lo, 1]`.
pub fn random_switches(rng: &mut ChaCha8Rng, g: &Graph, lo: f64) -> Vec<f64> {
    (0..g.m())
        .map(|e| {
            if g.is_backbone(e) {
                1.0
            } else {
                rng.random_range(lo..=1.0)
            }
        })
        .collect()
}

pub fn random_instance(seed: u64, n: usize, extra: usize) -> (Graph, DemandVector, Vec<f64>) {
    let mut r = rng(seed);
    let g = random_graph(&mut r, n, extra);
    let d = random_demand(&mut r, n);
    let s = random_switches(&mut r, &g, 0.05);
    (g, d, s)
}

pub fn laplacian(g: &Graph, s: &[f64]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(g.n(), g.n());
    for (e, edge) in g.edges().iter().enumerate() {
        let c = s[e] * edge.w;
        l[(edge.u, edge.u)] += c;
        l[(edge.v, edge.v)] += c;
        l[(edge.u, edge.v)] -= c;
        l[(edge.v, edge.u)] -= c;
    }
    l
}

/// Pseudoinverse from the eigendecomposition, dropping the null direction.
pub fn pinv(g: &Graph, s: &[f64]) -> DMatrix<f64> {
    let eig = laplacian(g, s).symmetric_eigen();
    let n = g.n();
    let k = eig.eigenvalues.imin();
    let mut p = DMatrix::zeros(n, n);
    for i in (0..n).filter(|&i| i != k) {
        let v = eig.eigenvectors.column(i);
        p += v * v.transpose() / eig.eigenvalues[i];
    }
    p
}

pub fn quad(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = nalgebra::DVector::from_column_slice(x);
    (v.transpose() * m * &v)[(0, 0)]
}

pub fn phi_oracle(g: &Graph, s: &[f64], d: &[f64]) -> f64 {
    quad(&pinv(g, s), d)
}

/// Incidence matrix with rows `e_u - e_v`.
pub fn incidence(g: &Graph) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(g.m(), g.n());
    for (e, edge) in g.edges().iter().enumerate() {
        a[(e, edge.u)] = 1.0;
        a[(e, edge.v)] = -1.0;
    }
    a
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// `(n, extra, seed)` for small dense-path instances.
pub fn small_instance(
    max_n: usize,
    max_extra: usize,
) -> impl Strategy<Value = (Graph, DemandVector, Vec<f64>)> {
    (2..=max_n, 0..=max_extra, any::<u64>())
        .prop_map(|(n, extra, seed)| random_instance(seed, n, extra))
}
