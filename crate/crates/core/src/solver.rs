//! Approximate Laplacian solves with a relative energy-norm guarantee.
//!
//! [`solve`] returns `x` with `||x - L^+ d||_L <= epsilon * ||L^+ d||_L`.
//! The iteration is preconditioned conjugate gradients. Stopping uses two
//! facts that hold for every iterate `x` with residual `r = d - L x`:
//!
//! * `||x - L^+ d||_L^2 = r^T L^+ r <= r^T L_T^+ r` for any spanning tree `T`
//!   that is a subgraph of `L`, since then `L_T <= L`. Every preconditioner
//!   carries such a tree, and checking the bound costs one `O(n)` tree solve.
//! * `||L^+ d||_L^2 = sup_z 2 d^T z - z^T L z >= d^T x + r^T x`.

use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{Error, Result};
use crate::graph::{project_zero_mean, DemandVector, DisjointSets, Graph};
use crate::laplacian::SparseLaplacian;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    BackboneTree,
    Jacobi,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative energy-norm tolerance, in `(0, 1)`.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub preconditioner: PreconditionerKind,
    /// Systems with fewer nodes than this are solved by dense factorization.
    /// Zero keeps every solve iterative.
    pub dense_threshold: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-8,
            max_iterations: 20_000,
            preconditioner: PreconditionerKind::BackboneTree,
            dense_threshold: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        SolverConfig {
            epsilon,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "solver epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Estimated relative energy-norm error at exit.
    pub achieved_residual: f64,
    pub converged: bool,
}

/// Spanning tree stored in BFS order, solved exactly by one upward and one
/// downward sweep.
#[derive(Debug, Clone)]
pub struct TreeSolver {
    order: Vec<usize>,
    parent: Vec<usize>,
    parent_weight: Vec<f64>,
    /// Graph edge behind each parent link, when built from a graph.
    parent_edge: Option<Vec<usize>>,
}

impl TreeSolver {
    /// Builds a BFS tree over weighted adjacency lists of `(node, weight, tag)`;
    /// `None` if the lists do not connect every node.
    fn from_adjacency(adj: &[Vec<(usize, f64, usize)>]) -> Option<(Self, Vec<usize>)> {
        let n = adj.len();
        if n == 0 {
            return None;
        }
        let mut parent = vec![usize::MAX; n];
        let mut parent_weight = vec![0.0; n];
        let mut tags = vec![usize::MAX; n];
        let mut order = Vec::with_capacity(n);
        parent[0] = 0;
        order.push(0);
        let mut head = 0;
        while head < order.len() {
            let i = order[head];
            head += 1;
            for &(j, w, tag) in &adj[i] {
                if parent[j] == usize::MAX && w > 0.0 {
                    parent[j] = i;
                    parent_weight[j] = w;
                    tags[j] = tag;
                    order.push(j);
                }
            }
        }
        (order.len() == n).then_some((
            TreeSolver {
                order,
                parent,
                parent_weight,
                parent_edge: None,
            },
            tags,
        ))
    }

    /// Tree formed by the backbone edges of `g`, weighted by `w_e s_e`.
    pub fn from_backbone(g: &Graph, s: &[f64]) -> Option<Self> {
        let mut adj = vec![Vec::new(); g.n()];
        for &e in g.backbone() {
            let edge = g.edge(e);
            let c = edge.w * s[e];
            adj[edge.u].push((edge.v, c, e));
            adj[edge.v].push((edge.u, c, e));
        }
        let (mut tree, tags) = Self::from_adjacency(&adj)?;
        tree.parent_edge = Some(tags);
        Some(tree)
    }

    /// The same tree with link weights `w_e s_e`; `None` if the tree was not
    /// built from a graph or a link would lose its weight.
    pub fn reweighted(&self, g: &Graph, s: &[f64]) -> Option<Self> {
        let edges = self.parent_edge.as_ref()?;
        let mut tree = self.clone();
        for &v in &self.order[1..] {
            let e = edges[v];
            let c = g.edge(e).w * s[e];
            if !(c > 0.0) {
                return None;
            }
            tree.parent_weight[v] = c;
        }
        Some(tree)
    }

    /// Maximum-weight spanning tree of the graph underlying `l`.
    pub fn max_weight(l: &SparseLaplacian) -> Option<Self> {
        let mut edges: Vec<(usize, usize, f64)> = l.edges().filter(|e| e.2 > 0.0).collect();
        edges.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
        let mut dsu = DisjointSets::new(l.n());
        let mut adj = vec![Vec::new(); l.n()];
        for (i, j, w) in edges {
            if dsu.union(i, j) {
                adj[i].push((j, w, 0));
                adj[j].push((i, w, 0));
            }
        }
        Self::from_adjacency(&adj).map(|(t, _)| t)
    }

    /// `z = L_T^+ r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.order.len();
        let mean = r.iter().sum::<f64>() / n as f64;
        // Upward sweep: subtree injections become edge currents.
        let mut acc: Vec<f64> = r.iter().map(|x| x - mean).collect();
        for &v in self.order[1..].iter().rev() {
            let f = acc[v];
            acc[self.parent[v]] += f;
            acc[v] = f / self.parent_weight[v];
        }
        // Downward sweep: accumulate potential drops from the root.
        z[self.order[0]] = 0.0;
        let mut sum = 0.0;
        for &v in &self.order[1..] {
            z[v] = z[self.parent[v]] + acc[v];
            sum += z[v];
        }
        let shift = sum / n as f64;
        z.iter_mut().for_each(|x| *x -= shift);
    }
}

/// Backbone tree plus the diagonal of the off-tree edges, `M = L_T + D_X`,
/// factored once by eliminating leaves towards the root.
#[derive(Debug, Clone)]
pub struct AugmentedTree {
    tree: TreeSolver,
    pivot: Vec<f64>,
}

impl AugmentedTree {
    /// `extra` is the off-tree part of the diagonal; at least one entry must
    /// be positive.
    fn new(tree: TreeSolver, extra: &[f64]) -> Self {
        let n = extra.len();
        let mut pivot = extra.to_vec();
        for &v in &tree.order[1..] {
            pivot[v] += tree.parent_weight[v];
            pivot[tree.parent[v]] += tree.parent_weight[v];
        }
        for &v in tree.order[1..].iter().rev() {
            let c = tree.parent_weight[v];
            pivot[tree.parent[v]] -= c * c / pivot[v];
        }
        debug_assert_eq!(pivot.len(), n);
        AugmentedTree { tree, pivot }
    }

    /// `z = P M^{-1} P r` with `P` the projection onto zero-mean vectors.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let t = &self.tree;
        let n = r.len();
        let mean = r.iter().sum::<f64>() / n as f64;
        for (zi, ri) in z.iter_mut().zip(r) {
            *zi = ri - mean;
        }
        // Forward elimination, then back substitution in place.
        for &v in t.order[1..].iter().rev() {
            z[t.parent[v]] += t.parent_weight[v] / self.pivot[v] * z[v];
        }
        let root = t.order[0];
        z[root] /= self.pivot[root];
        let mut sum = z[root];
        for &v in &t.order[1..] {
            z[v] = (z[v] + t.parent_weight[v] * z[t.parent[v]]) / self.pivot[v];
            sum += z[v];
        }
        let shift = sum / n as f64;
        z.iter_mut().for_each(|x| *x -= shift);
    }
}

#[derive(Debug, Clone)]
pub enum Preconditioner {
    Tree(TreeSolver),
    AugmentedTree(AugmentedTree),
    /// Diagonal scaling; the tree only certifies the error.
    Jacobi(Vec<f64>, TreeSolver),
    Identity(TreeSolver),
}

impl Preconditioner {
    /// Builds the preconditioner for `l`. With graph context the tree comes
    /// from the backbone; otherwise from the heaviest spanning tree of `l`.
    pub fn build(
        kind: PreconditionerKind,
        l: &SparseLaplacian,
        context: Option<(&Graph, &[f64])>,
    ) -> Result<Self> {
        let tree = context
            .and_then(|(g, s)| TreeSolver::from_backbone(g, s))
            .or_else(|| TreeSolver::max_weight(l))
            .ok_or_else(|| Error::Structural("Laplacian graph is disconnected".into()))?;
        Ok(match kind {
            PreconditionerKind::BackboneTree => Self::from_tree(tree, l),
            PreconditionerKind::Jacobi => Preconditioner::Jacobi(l.diagonal(), tree),
            PreconditionerKind::None => Preconditioner::Identity(tree),
        })
    }

    /// Tree preconditioner for `l`, augmented with the diagonal of the
    /// edges of `l` outside the tree when there are any.
    pub fn from_tree(tree: TreeSolver, l: &SparseLaplacian) -> Self {
        let mut extra = l.diagonal();
        let scale = extra.iter().fold(0.0f64, |a, &b| a.max(b));
        for &v in &tree.order[1..] {
            extra[v] -= tree.parent_weight[v];
            extra[tree.parent[v]] -= tree.parent_weight[v];
        }
        // Round-off from the subtraction is not off-tree weight.
        extra.iter_mut().for_each(|x| {
            if *x <= 1e-12 * scale {
                *x = 0.0
            }
        });
        if extra.iter().all(|&x| x == 0.0) {
            Preconditioner::Tree(tree)
        } else {
            Preconditioner::AugmentedTree(AugmentedTree::new(tree, &extra))
        }
    }

    /// Spanning subgraph tree of `L` used to bound the error.
    fn certifier(&self) -> &TreeSolver {
        match self {
            Preconditioner::Tree(t) => t,
            Preconditioner::AugmentedTree(a) => &a.tree,
            Preconditioner::Jacobi(_, t) | Preconditioner::Identity(t) => t,
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Tree(t) => t.apply(r, z),
            Preconditioner::AugmentedTree(t) => t.apply(r, z),
            Preconditioner::Jacobi(diag, _) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(diag) {
                    *zi = ri / di;
                }
            }
            Preconditioner::Identity(_) => z.copy_from_slice(r),
        }
    }
}

/// Solves `L x = d` to the configured energy-norm tolerance.
pub fn solve(l: &SparseLaplacian, d: &DemandVector, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if l.n() < cfg.dense_threshold {
        return solve_dense(l, d);
    }
    if d.is_zero() {
        return Ok(zero_result(l.n()));
    }
    let pre = Preconditioner::build(cfg.preconditioner, l, None)?;
    solve_with(l, d, cfg, &pre, None)
}

fn zero_result(n: usize) -> SolveResult {
    SolveResult {
        x: vec![0.0; n],
        iterations: 0,
        achieved_residual: 0.0,
        converged: true,
    }
}

fn solve_dense(l: &SparseLaplacian, d: &DemandVector) -> Result<SolveResult> {
    let x = dense::exact_pinv_apply(&l.to_dense(), d)?;
    Ok(SolveResult {
        x,
        iterations: 0,
        achieved_residual: 0.0,
        converged: true,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradients with a prebuilt preconditioner and optional warm start.
pub fn solve_with(
    l: &SparseLaplacian,
    d: &DemandVector,
    cfg: &SolverConfig,
    pre: &Preconditioner,
    warm_start: Option<&[f64]>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let n = l.n();
    crate::error::check_len("demand vector", d.len(), n)?;
    if n < cfg.dense_threshold {
        return solve_dense(l, d);
    }
    if d.is_zero() {
        return Ok(zero_result(n));
    }
    let d = d.as_slice();
    let eps2 = cfg.epsilon * cfg.epsilon;
    let tree = pre.certifier();
    let tree_is_pre = matches!(pre, Preconditioner::Tree(_));

    let mut x = match warm_start {
        Some(x0) if x0.len() == n && x0.iter().all(|v| v.is_finite()) => project_zero_mean(x0),
        _ => vec![0.0; n],
    };
    let mut lx = l.mul_vec(&x);
    let mut r: Vec<f64> = d.iter().zip(&lx).map(|(a, b)| a - b).collect();
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut rz = dot(&r, &z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut last_error = f64::INFINITY;

    // `r^T L_T^+ r`, reusing `z` when the tree is the preconditioner.
    let tree_bound = |r: &[f64], rz: f64, y: &mut [f64]| {
        if tree_is_pre {
            rz
        } else {
            tree.apply(r, y);
            dot(r, y)
        }
    };

    for it in 0..=cfg.max_iterations {
        if rz <= 0.0 {
            // r vanished exactly.
            return Ok(finish(x, it, 0.0));
        }
        let lower = dot(d, &x) + dot(&r, &x);
        if lower > 0.0 {
            let err = tree_bound(&r, rz, &mut y) / lower;
            last_error = err.sqrt();
            if err <= eps2 {
                // Confirm against the true residual before accepting.
                l.mul_vec_into(&x, &mut lx);
                for i in 0..n {
                    r[i] = d[i] - lx[i];
                }
                pre.apply(&r, &mut z);
                rz = dot(&r, &z);
                let lower_true = dot(d, &x) + dot(&r, &x);
                let err_true = tree_bound(&r, rz, &mut y) / lower_true;
                if lower_true > 0.0 && err_true <= eps2 {
                    return Ok(finish(x, it, err_true.sqrt()));
                }
                // Residual drifted; restart the recurrence from the true residual.
                p.copy_from_slice(&z);
            }
        }
        if it == cfg.max_iterations {
            break;
        }

        l.mul_vec_into(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) || !pq.is_finite() {
            return Err(Error::Numerical(format!(
                "conjugate gradient breakdown at iteration {it} (p^T L p = {pq:e})"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iterations,
        residual: last_error,
    })
}

fn finish(x: Vec<f64>, iterations: usize, err: f64) -> SolveResult {
    SolveResult {
        x: project_zero_mean(&x),
        iterations,
        achieved_residual: err,
        converged: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;
    use crate::laplacian::assemble_laplacian;

    fn lap(n: usize, edges: &[(usize, usize, f64)]) -> SparseLaplacian {
        let es: Vec<Edge> = edges.iter().map(|&(a, b, w)| Edge::new(a, b, w)).collect();
        let m = es.len();
        let g = Graph::new_unchecked(n, es, vec![]);
        assemble_laplacian(&g, &vec![1.0; m]).unwrap()
    }

    fn all_kinds() -> [PreconditionerKind; 3] {
        [
            PreconditionerKind::BackboneTree,
            PreconditionerKind::Jacobi,
            PreconditionerKind::None,
        ]
    }

    #[test]
    fn two_node_solution() {
        let l = lap(2, &[(0, 1, 2.0)]);
        let d = DemandVector::new(vec![1.0, -1.0]).unwrap();
        for kind in all_kinds() {
            let cfg = SolverConfig {
                preconditioner: kind,
                ..Default::default()
            };
            let res = solve(&l, &d, &cfg).unwrap();
            assert!((res.x[0] - 0.25).abs() < 1e-12, "{kind:?}: {:?}", res.x);
            assert!((res.x[1] + 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn path_solution() {
        let l = lap(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let d = DemandVector::new(vec![1.0, 0.0, -1.0]).unwrap();
        for kind in all_kinds() {
            let cfg = SolverConfig {
                preconditioner: kind,
                epsilon: 1e-12,
                ..Default::default()
            };
            let x = solve(&l, &d, &cfg).unwrap().x;
            for (a, b) in x.iter().zip([1.0, 0.0, -1.0]) {
                assert!((a - b).abs() < 1e-10, "{kind:?}: {x:?}");
            }
        }
    }

    #[test]
    fn zero_demand_is_free() {
        let l = lap(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let res = solve(&l, &DemandVector::zeros(3), &SolverConfig::default()).unwrap();
        assert_eq!(res.x, vec![0.0; 3]);
        assert_eq!(res.iterations, 0);
        assert!(res.converged);
    }

    #[test]
    fn tree_preconditioner_is_exact_on_trees() {
        let l = lap(5, &[(0, 1, 1.0), (1, 2, 3.0), (1, 3, 0.5), (3, 4, 2.0)]);
        let d = DemandVector::centered(vec![1.0, -2.0, 0.5, 3.0, 0.0]);
        let res = solve(&l, &d, &SolverConfig::default()).unwrap();
        assert!(res.iterations <= 1);
        let exact = dense::exact_pinv_apply(&l.to_dense(), &d).unwrap();
        for (a, b) in res.x.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn disconnected_is_structural() {
        let l = lap(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        let d = DemandVector::new(vec![1.0, 0.0, -1.0, 0.0]).unwrap();
        for kind in all_kinds() {
            let cfg = SolverConfig {
                preconditioner: kind,
                ..Default::default()
            };
            assert!(
                matches!(solve(&l, &d, &cfg), Err(Error::Structural(_))),
                "{kind:?}"
            );
        }
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let mut edges = Vec::new();
        for i in 0..40 {
            edges.push((i, i + 1, 1.0 + (i % 3) as f64));
            edges.push((i, (i + 7) % 41, 0.1));
        }
        let l = lap(41, &edges);
        let mut v = vec![0.0; 41];
        v[0] = 1.0;
        v[20] = -1.0;
        let d = DemandVector::new(v).unwrap();
        let cfg = SolverConfig {
            preconditioner: PreconditionerKind::None,
            max_iterations: 2,
            epsilon: 1e-10,
            ..Default::default()
        };
        match solve(&l, &d, &cfg) {
            Err(Error::NotConverged {
                iterations,
                residual,
            }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn dense_threshold_routes_to_factorization() {
        let l = lap(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        let d = DemandVector::new(vec![1.0, -1.0, 0.0]).unwrap();
        let cfg = SolverConfig {
            dense_threshold: 10,
            ..Default::default()
        };
        let res = solve(&l, &d, &cfg).unwrap();
        assert_eq!(res.iterations, 0);
        assert!((res.x[0] - res.x[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_config() {
        let l = lap(2, &[(0, 1, 1.0)]);
        let d = DemandVector::new(vec![1.0, -1.0]).unwrap();
        for eps in [0.0, 1.0, -0.5] {
            let cfg = SolverConfig::with_epsilon(eps);
            assert!(matches!(solve(&l, &d, &cfg), Err(Error::InvalidConfig(_))));
        }
    }
}
