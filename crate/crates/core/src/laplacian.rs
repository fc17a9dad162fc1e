//! Switched Laplacians `L_s = sum_e s_e w_e a_e a_e^T` in compressed sparse
//! row form, and the spectral quantities derived from them.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::dense::{self, DensePinv, DENSE_LIMIT};
use crate::error::{check_len, Error, Result};
use crate::graph::{DemandVector, Graph};
use crate::solver::{self, SolverConfig};

/// Symmetric sparse matrix in CSR layout. Rows hold sorted, unique column
/// indices; parallel edges are summed into one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLaplacian {
    n: usize,
    row_ptr: Arc<Vec<usize>>,
    cols: Arc<Vec<usize>>,
    vals: Vec<f64>,
}

impl SparseLaplacian {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = L x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T L x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let y = self.mul_vec(x);
        y.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Off-diagonal entries `(i, j, -L_ij)` with `i < j` and nonzero weight.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.row(i)
                .filter(move |&(j, v)| j > i && v != 0.0)
                .map(move |(j, v)| (i, j, -v))
        })
    }

    /// Whether the nonzero off-diagonal pattern connects all nodes.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for (j, v) in self.row(i) {
                if v != 0.0 && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.n
    }

    /// Largest absolute row sum of `L * 1` relative to the largest row norm.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

/// Sparsity pattern of every `L_s` on a fixed graph, with the storage slots
/// each edge scatters into. Reassembly for a new `s` is one pass over the
/// edges.
#[derive(Debug, Clone)]
pub struct LaplacianPattern {
    n: usize,
    row_ptr: Arc<Vec<usize>>,
    cols: Arc<Vec<usize>>,
    /// Slots of `(u, u)`, `(v, v)`, `(u, v)` and `(v, u)` for each edge.
    slots: Vec<[usize; 4]>,
}

impl LaplacianPattern {
    pub fn new(g: &Graph) -> Result<Self> {
        let n = g.n();
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for e in g.edges() {
            if e.u >= n || e.v >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({}, {}) out of range for n = {n}",
                    e.u, e.v
                )));
            }
            rows[e.u].push(e.v);
            rows[e.v].push(e.u);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        let slot = |i: usize, j: usize| {
            let span = row_ptr[i]..row_ptr[i + 1];
            span.start
                + cols[span]
                    .binary_search(&j)
                    .expect("pattern holds every edge")
        };
        let slots = g
            .edges()
            .iter()
            .map(|e| {
                [
                    slot(e.u, e.u),
                    slot(e.v, e.v),
                    slot(e.u, e.v),
                    slot(e.v, e.u),
                ]
            })
            .collect();
        Ok(LaplacianPattern {
            n,
            row_ptr: Arc::new(row_ptr),
            cols: Arc::new(cols),
            slots,
        })
    }

    /// `L_s` on the graph this pattern was built from.
    pub fn assemble(&self, g: &Graph, s: &[f64]) -> Result<SparseLaplacian> {
        check_len("switch vector", s.len(), self.slots.len())?;
        check_len("edge list", g.m(), self.slots.len())?;
        let mut vals = vec![0.0; self.cols.len()];
        for ((e, slot), &se) in g.edges().iter().zip(&self.slots).zip(s) {
            let c = e.w * se;
            vals[slot[0]] += c;
            vals[slot[1]] += c;
            vals[slot[2]] -= c;
            vals[slot[3]] -= c;
        }
        Ok(SparseLaplacian {
            n: self.n,
            row_ptr: Arc::clone(&self.row_ptr),
            cols: Arc::clone(&self.cols),
            vals,
        })
    }
}

/// Assembles `L_s = A^T diag(w * s) A`.
pub fn assemble_laplacian(g: &Graph, s: &[f64]) -> Result<SparseLaplacian> {
    check_len("switch vector", s.len(), g.m())?;
    LaplacianPattern::new(g)?.assemble(g, s)
}

/// Effective resistances `rho_e = a_e^T L_s^+ a_e` for every edge.
///
/// Uses the dense pseudoinverse up to [`DENSE_LIMIT`] nodes and one
/// iterative solve per distinct endpoint pair above it.
pub fn effective_resistances(g: &Graph, s: &[f64]) -> Result<Vec<f64>> {
    check_len("switch vector", s.len(), g.m())?;
    if g.n() <= DENSE_LIMIT {
        let pinv = DensePinv::new(g, s)?;
        return Ok(g
            .edges()
            .iter()
            .map(|e| pinv.resistance(e.u, e.v))
            .collect());
    }
    let cfg = SolverConfig {
        epsilon: 1e-10,
        ..SolverConfig::default()
    };
    effective_resistances_iterative(g, s, &cfg)
}

/// Per-edge solves with the given configuration; parallel edges share one
/// solve.
pub fn effective_resistances_iterative(
    g: &Graph,
    s: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let l = assemble_laplacian(g, s)?;
    let pre = solver::Preconditioner::build(cfg.preconditioner, &l, Some((g, s)))?;
    let mut cache: std::collections::HashMap<(usize, usize), f64> = Default::default();
    let mut out = Vec::with_capacity(g.m());
    for e in g.edges() {
        if let Some(&r) = cache.get(&(e.u, e.v)) {
            out.push(r);
            continue;
        }
        let mut rhs = vec![0.0; g.n()];
        rhs[e.u] = 1.0;
        rhs[e.v] = -1.0;
        let d = DemandVector::new(rhs)?;
        let res = solver::solve_with(&l, &d, cfg, &pre, None)?;
        let r = res.x[e.u] - res.x[e.v];
        cache.insert((e.u, e.v), r);
        out.push(r);
    }
    Ok(out)
}

/// Leverages `l_e = s_e w_e rho_e(s)`.
pub fn leverages(g: &Graph, s: &[f64]) -> Result<Vec<f64>> {
    let rho = effective_resistances(g, s)?;
    Ok(g.edges()
        .iter()
        .zip(s)
        .zip(&rho)
        .map(|((e, &se), &r)| se * e.w * r)
        .collect())
}

/// Second-smallest eigenvalue of `L_s` (dense path only).
pub fn algebraic_connectivity(g: &Graph, s: &[f64]) -> Result<f64> {
    check_len("switch vector", s.len(), g.m())?;
    dense::ensure_dense(g.n())?;
    let l = dense::dense_laplacian(g, s)?;
    dense::lambda2(&l)
}
