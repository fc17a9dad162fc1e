//! The congestion objective `phi(s) = d^T L_s^+ d`, its gradient, its
//! Hessian on small instances, and curvature diagnostics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dense::{self, DensePinv};
use crate::error::{check_len, Result};
use crate::graph::{DemandVector, Graph, SwitchVector};
use crate::laplacian::{effective_resistances, LaplacianPattern};
use crate::solver::{self, Preconditioner, PreconditionerKind, SolverConfig, TreeSolver};

/// Gradient and voltage differences from one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffResult {
    /// `grad_e = -w_e delta_e^2`.
    pub grad: Vec<f64>,
    /// `delta_e = x_u - x_v` for edge `(u, v)`.
    pub delta: Vec<f64>,
    /// `zeta_e = sqrt(w_e) delta_e`.
    pub zeta: Vec<f64>,
    /// `d^T x`.
    pub phi: f64,
    pub voltages: Vec<f64>,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct HessianInfo {
    pub h: DMatrix<f64>,
    /// `2 phi(s)`.
    pub opnorm_bound: f64,
    /// `3 ||w * rho_T||_2`.
    pub gsc_m: f64,
}

fn check_inputs(g: &Graph, s: &[f64], d: &DemandVector) -> Result<()> {
    check_len("switch vector", s.len(), g.m())?;
    check_len("demand vector", d.len(), g.n())
}

fn diff_from_voltages(g: &Graph, x: Vec<f64>, d: &DemandVector, iterations: usize) -> DiffResult {
    let m = g.m();
    let mut grad = Vec::with_capacity(m);
    let mut delta = Vec::with_capacity(m);
    let mut zeta = Vec::with_capacity(m);
    for e in g.edges() {
        let de = x[e.u] - x[e.v];
        delta.push(de);
        zeta.push(e.w.sqrt() * de);
        grad.push(-e.w * de * de);
    }
    let phi = d.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().max(0.0);
    DiffResult {
        grad,
        delta,
        zeta,
        phi,
        voltages: x,
        solver_iterations: iterations,
    }
}

/// Congestion through one approximate solve.
pub fn phi(g: &Graph, s: &[f64], d: &DemandVector, cfg: &SolverConfig) -> Result<f64> {
    Ok(approx_diff(g, s, d, cfg)?.phi)
}

/// Gradient of the congestion from a single Laplacian solve.
pub fn approx_diff(
    g: &Graph,
    s: &[f64],
    d: &DemandVector,
    cfg: &SolverConfig,
) -> Result<DiffResult> {
    approx_diff_warm(g, s, d, cfg, None)
}

/// [`approx_diff`] with the solve started from `warm_start`.
pub fn approx_diff_warm(
    g: &Graph,
    s: &[f64],
    d: &DemandVector,
    cfg: &SolverConfig,
    warm_start: Option<&[f64]>,
) -> Result<DiffResult> {
    check_inputs(g, s, d)?;
    DiffWorkspace::new(g)?.diff(g, s, d, cfg, warm_start)
}

/// State shared by repeated gradient evaluations on one graph: the
/// Laplacian sparsity pattern and the backbone tree.
#[derive(Debug, Clone)]
pub struct DiffWorkspace {
    pattern: LaplacianPattern,
    tree: Option<TreeSolver>,
}

impl DiffWorkspace {
    pub fn new(g: &Graph) -> Result<Self> {
        Ok(DiffWorkspace {
            pattern: LaplacianPattern::new(g)?,
            tree: TreeSolver::from_backbone(g, &vec![1.0; g.m()]),
        })
    }

    /// [`approx_diff_warm`] on the graph this workspace was built for.
    pub fn diff(
        &self,
        g: &Graph,
        s: &[f64],
        d: &DemandVector,
        cfg: &SolverConfig,
        warm_start: Option<&[f64]>,
    ) -> Result<DiffResult> {
        check_inputs(g, s, d)?;
        cfg.validate()?;
        if d.is_zero() {
            return Ok(diff_from_voltages(g, vec![0.0; g.n()], d, 0));
        }
        let l = self.pattern.assemble(g, s)?;
        if g.n() < cfg.dense_threshold {
            let res = solver::solve(&l, d, cfg)?;
            return Ok(diff_from_voltages(g, res.x, d, res.iterations));
        }
        let reused = match (cfg.preconditioner, &self.tree) {
            (PreconditionerKind::BackboneTree, Some(tree)) => tree.reweighted(g, s),
            _ => None,
        };
        let pre = match reused {
            Some(tree) => Preconditioner::from_tree(tree, &l),
            None => Preconditioner::build(cfg.preconditioner, &l, Some((g, s)))?,
        };
        let res = solver::solve_with(&l, d, cfg, &pre, warm_start)?;
        Ok(diff_from_voltages(g, res.x, d, res.iterations))
    }
}

/// Exact voltages `L_s^+ d` through the dense path.
pub fn exact_voltages(g: &Graph, s: &[f64], d: &DemandVector) -> Result<Vec<f64>> {
    check_inputs(g, s, d)?;
    dense::ensure_dense(g.n())?;
    if d.is_zero() {
        return Ok(vec![0.0; g.n()]);
    }
    dense::exact_pinv_apply(&dense::dense_laplacian(g, s)?, d)
}

pub fn exact_diff(g: &Graph, s: &[f64], d: &DemandVector) -> Result<DiffResult> {
    let x = exact_voltages(g, s, d)?;
    Ok(diff_from_voltages(g, x, d, 0))
}

pub fn exact_phi(g: &Graph, s: &[f64], d: &DemandVector) -> Result<f64> {
    Ok(exact_diff(g, s, d)?.phi)
}

pub fn exact_gradient(g: &Graph, s: &[f64], d: &DemandVector) -> Result<Vec<f64>> {
    Ok(exact_diff(g, s, d)?.grad)
}

/// Hessian `2 diag(zeta) P diag(zeta)` with `P = W^{1/2} A L^+ A^T W^{1/2}`.
pub fn hessian_dense(g: &Graph, s: &[f64], d: &DemandVector) -> Result<HessianInfo> {
    check_inputs(g, s, d)?;
    dense::ensure_dense(g.n())?;
    let m = g.m();
    let pinv = DensePinv::new(g, s)?;
    let x = if d.is_zero() {
        vec![0.0; g.n()]
    } else {
        pinv.apply(d)
    };
    let diff = diff_from_voltages(g, x, d, 0);
    let edges = g.edges();
    let mut h = DMatrix::zeros(m, m);
    for a in 0..m {
        let ea = edges[a];
        for b in a..m {
            let eb = edges[b];
            let p = ea.w.sqrt() * eb.w.sqrt() * pinv.bilinear(ea.u, ea.v, eb.u, eb.v);
            let v = 2.0 * diff.zeta[a] * p * diff.zeta[b];
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    Ok(HessianInfo {
        h,
        opnorm_bound: 2.0 * diff.phi,
        gsc_m: gsc_constant(g)?,
    })
}

/// `3 ||w * rho_T||_2`, with resistances measured in the backbone graph.
pub fn gsc_constant(g: &Graph) -> Result<f64> {
    let rho_t = effective_resistances(g, &SwitchVector::backbone(g))?;
    let norm = g
        .edges()
        .iter()
        .zip(&rho_t)
        .map(|(e, r)| (e.w * r).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(3.0 * norm)
}

/// `|phi(s) + <grad, s>| / phi(s)`; absolute when `phi(s) = 0`.
pub fn homogeneity_residual(
    g: &Graph,
    s: &[f64],
    d: &DemandVector,
    cfg: &SolverConfig,
) -> Result<f64> {
    let diff = if g.n() < cfg.dense_threshold {
        exact_diff(g, s, d)?
    } else {
        approx_diff(g, s, d, cfg)?
    };
    Ok(homogeneity_of(&diff, s))
}

pub fn homogeneity_of(diff: &DiffResult, s: &[f64]) -> f64 {
    let inner: f64 = diff.grad.iter().zip(s).map(|(a, b)| a * b).sum();
    let r = (diff.phi + inner).abs();
    if diff.phi > 0.0 {
        r / diff.phi
    } else {
        r
    }
}

/// Kirchhoff index `R(s) = sum_{i<j} rho_ij(s) = n tr(L_s^+)`.
pub fn total_effective_resistance(g: &Graph, s: &[f64]) -> Result<f64> {
    check_len("switch vector", s.len(), g.m())?;
    let pinv = DensePinv::new(g, s)?;
    Ok(g.n() as f64 * pinv.matrix().trace())
}

/// `dR/ds_e = -n w_e a_e^T (L_s^+)^2 a_e`.
pub fn total_effective_resistance_gradient(g: &Graph, s: &[f64]) -> Result<Vec<f64>> {
    check_len("switch vector", s.len(), g.m())?;
    let pinv = DensePinv::new(g, s)?;
    let n = g.n();
    let p = pinv.matrix();
    Ok(g.edges()
        .iter()
        .map(|e| {
            // ||L^+ a_e||^2 from columns u and v.
            let sq: f64 = (0..n).map(|k| (p[(k, e.u)] - p[(k, e.v)]).powi(2)).sum();
            -(n as f64) * e.w * sq
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn two_node(w: f64) -> Graph {
        Graph::new(2, vec![Edge::new(0, 1, w)], vec![0]).unwrap()
    }

    fn triangle() -> Graph {
        Graph::new(
            3,
            vec![
                Edge::new(0, 1, 1.0),
                Edge::new(1, 2, 1.0),
                Edge::new(0, 2, 1.0),
            ],
            vec![0, 1],
        )
        .unwrap()
    }

    #[test]
    fn two_node_values() {
        let g = two_node(2.0);
        let d = DemandVector::pair(2, 0, 1);
        let diff = approx_diff(&g, &[1.0], &d, &SolverConfig::default()).unwrap();
        assert!((diff.phi - 0.5).abs() < 1e-12);
        assert!((diff.delta[0] - 0.5).abs() < 1e-12);
        assert!((diff.grad[0] + 0.5).abs() < 1e-12);
        assert!(homogeneity_of(&diff, &[1.0]) < 1e-12);
        let h = hessian_dense(&g, &[1.0], &d).unwrap();
        assert!((h.h[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((h.opnorm_bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_gradient() {
        let g = triangle();
        let d = DemandVector::pair(3, 0, 1);
        let diff = approx_diff(&g, &[1.0; 3], &d, &SolverConfig::default()).unwrap();
        assert!((diff.phi - 2.0 / 3.0).abs() < 1e-10);
        for (a, b) in diff.grad.iter().zip([-4.0 / 9.0, -1.0 / 9.0, -1.0 / 9.0]) {
            assert!((a - b).abs() < 1e-10, "{:?}", diff.grad);
        }
    }

    #[test]
    fn opening_an_edge_raises_phi() {
        let g = triangle();
        let d = DemandVector::pair(3, 0, 1);
        let closed = exact_phi(&g, &[1.0; 3], &d).unwrap();
        let open = exact_phi(&g, &[1.0, 1.0, 0.0], &d).unwrap();
        assert!(open >= closed);
    }

    #[test]
    fn zero_demand_is_all_zero() {
        let g = triangle();
        let d = DemandVector::zeros(3);
        let diff = approx_diff(&g, &[1.0, 1.0, 0.5], &d, &SolverConfig::default()).unwrap();
        assert_eq!(diff.grad, vec![0.0; 3]);
        assert_eq!(diff.delta, vec![0.0; 3]);
        assert_eq!(exact_gradient(&g, &[1.0; 3], &d).unwrap(), vec![0.0; 3]);
        let h = hessian_dense(&g, &[1.0; 3], &d).unwrap();
        assert_eq!(h.h.amax(), 0.0);
        assert_eq!(
            homogeneity_residual(&g, &[1.0; 3], &d, &SolverConfig::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn kirchhoff_index_two_nodes() {
        // One pair with resistance 1/(s w).
        let g = two_node(4.0);
        let r = total_effective_resistance(&g, &[0.5]).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
        let grad = total_effective_resistance_gradient(&g, &[0.5]).unwrap();
        assert!((grad[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn gsc_constant_on_tree() {
        // Tree edges have w rho_T = 1; the extra edge spans two tree edges.
        let g = triangle();
        let m = gsc_constant(&g).unwrap();
        assert!((m - 3.0 * 6.0f64.sqrt()).abs() < 1e-10);
    }
}
