//! Dense reference computations for desk-scale instances: exact
//! pseudoinverse applications, full pseudoinverses, and eigenvalues.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{check_len, Error, Result};
use crate::graph::Graph;

/// Largest node count for which dense factorizations are attempted.
pub const DENSE_LIMIT: usize = 2000;

/// Relative pivot below which `L + 11^T/n` is treated as singular.
const PIVOT_TOL: f64 = 1e-13;

pub(crate) fn ensure_dense(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::DenseLimit {
            n,
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

/// Dense `L_s`.
pub fn dense_laplacian(g: &Graph, s: &[f64]) -> Result<DMatrix<f64>> {
    check_len("switch vector", s.len(), g.m())?;
    let mut l = DMatrix::zeros(g.n(), g.n());
    for (e, edge) in g.edges().iter().enumerate() {
        let c = edge.w * s[e];
        l[(edge.u, edge.u)] += c;
        l[(edge.v, edge.v)] += c;
        l[(edge.u, edge.v)] -= c;
        l[(edge.v, edge.u)] -= c;
    }
    Ok(l)
}

/// Cholesky factor of `L + 11^T / n`, which is positive definite exactly when
/// `L` is a connected Laplacian.
fn grounded_cholesky(l: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let n = l.nrows();
    if n == 0 || l.ncols() != n {
        return Err(Error::InvalidInput(
            "Laplacian must be square and nonempty".into(),
        ));
    }
    let shift = 1.0 / n as f64;
    let shifted = l.map(|x| x + shift);
    let scale = shifted
        .diagonal()
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    let chol = Cholesky::new(shifted)
        .ok_or_else(|| Error::Structural("Laplacian has rank below n - 1 (disconnected)".into()))?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b * b));
    if min_pivot < PIVOT_TOL * scale {
        return Err(Error::Structural(
            "Laplacian has rank below n - 1 (disconnected)".into(),
        ));
    }
    Ok(chol)
}

/// Exact `L^+ d` through `(L + 11^T/n)^{-1} d - (1^T d / n) 1`.
///
/// `d` must be orthogonal to the all-ones vector.
pub fn exact_pinv_apply(l: &DMatrix<f64>, d: &[f64]) -> Result<Vec<f64>> {
    check_len("demand vector", d.len(), l.nrows())?;
    crate::graph::check_balanced(d)?;
    let chol = grounded_cholesky(l)?;
    let n = d.len();
    let x = chol.solve(&DVector::from_column_slice(d));
    let mean_d = d.iter().sum::<f64>() / n as f64;
    Ok(x.iter().map(|v| v - mean_d).collect())
}

/// Full pseudoinverse of a connected switched Laplacian.
#[derive(Debug, Clone)]
pub struct DensePinv {
    pinv: DMatrix<f64>,
}

impl DensePinv {
    pub fn new(g: &Graph, s: &[f64]) -> Result<Self> {
        ensure_dense(g.n())?;
        let l = dense_laplacian(g, s)?;
        Self::from_laplacian(&l)
    }

    pub fn from_laplacian(l: &DMatrix<f64>) -> Result<Self> {
        let n = l.nrows();
        let chol = grounded_cholesky(l)?;
        let shift = 1.0 / n as f64;
        let mut pinv = chol.inverse();
        pinv.iter_mut().for_each(|x| *x -= shift);
        // Symmetrize away round-off.
        let pinv = (&pinv + pinv.transpose()) * 0.5;
        Ok(DensePinv { pinv })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn n(&self) -> usize {
        self.pinv.nrows()
    }

    pub fn apply(&self, d: &[f64]) -> Vec<f64> {
        (&self.pinv * DVector::from_column_slice(d))
            .iter()
            .copied()
            .collect()
    }

    /// `(e_i - e_j)^T L^+ (e_k - e_l)`.
    pub fn bilinear(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let p = &self.pinv;
        p[(i, k)] - p[(i, l)] - p[(j, k)] + p[(j, l)]
    }

    pub fn resistance(&self, i: usize, j: usize) -> f64 {
        self.bilinear(i, j, i, j)
    }
}

/// Second-smallest eigenvalue of a symmetric matrix.
pub fn lambda2(l: &DMatrix<f64>) -> Result<f64> {
    let mut ev = sorted_eigenvalues(l)?;
    if ev.len() < 2 {
        return Ok(0.0);
    }
    Ok(ev.swap_remove(1))
}

pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver failed".into()))?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if ev.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> Result<f64> {
    let ev = sorted_eigenvalues(m)?;
    Ok(ev.iter().fold(0.0f64, |a, &b| a.max(b.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    #[test]
    fn two_node_pinv_apply() {
        let l = DMatrix::from_row_slice(2, 2, &[2.0, -2.0, -2.0, 2.0]);
        let x = exact_pinv_apply(&l, &[1.0, -1.0]).unwrap();
        assert!((x[0] - 0.25).abs() < 1e-15 && (x[1] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn triangle_voltage_drop() {
        let g = Graph::new(
            3,
            vec![
                Edge::new(0, 1, 1.0),
                Edge::new(1, 2, 1.0),
                Edge::new(0, 2, 1.0),
            ],
            vec![0, 1],
        )
        .unwrap();
        let l = dense_laplacian(&g, &[1.0; 3]).unwrap();
        let x = exact_pinv_apply(&l, &[1.0, -1.0, 0.0]).unwrap();
        assert!((x[0] - x[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!(x.iter().sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn unbalanced_demand_rejected() {
        let l = DMatrix::from_row_slice(2, 2, &[2.0, -2.0, -2.0, 2.0]);
        assert!(exact_pinv_apply(&l, &[1.0, -1.0 + 1e-3]).is_err());
    }

    #[test]
    fn disconnected_is_structural() {
        let l = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            exact_pinv_apply(&l, &[1.0, -1.0, 0.0]),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn pinv_is_moore_penrose() {
        let g = Graph::new(
            4,
            vec![
                Edge::new(0, 1, 1.0),
                Edge::new(1, 2, 2.0),
                Edge::new(2, 3, 0.5),
                Edge::new(0, 3, 3.0),
            ],
            vec![0, 1, 2],
        )
        .unwrap();
        let l = dense_laplacian(&g, &[1.0, 1.0, 1.0, 0.25]).unwrap();
        let p = DensePinv::from_laplacian(&l).unwrap();
        let lpl = &l * p.matrix() * &l;
        assert!((lpl - &l).amax() < 1e-12);
        let plp = p.matrix() * &l * p.matrix();
        assert!((plp - p.matrix()).amax() < 1e-12);
    }
}
