//! The oblique manifold `OB(d, n)`: `d×n` matrices whose columns lie on
//! `S^{d-1}`, with its tangent projection, retraction and the conversion of
//! ambient Hessian actions into Riemannian ones.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mixture::UNIT_TOL;

const DEGENERATE_NORM: f64 = 1e-14;

/// A point of `OB(d, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliquePoint(DMatrix<f64>);

impl ObliquePoint {
    /// Wraps a matrix whose columns are already unit norm (within `1e-12`).
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        for (j, col) in x.column_iter().enumerate() {
            let norm = col.norm();
            if !((norm - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::InvalidMixture(format!(
                    "column {j} has norm {norm}, not on the oblique manifold"
                )));
            }
        }
        Ok(Self(x))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn count(&self) -> usize {
        self.0.ncols()
    }

    /// Metric-projection retraction `R_X(η) = normalize(X + η)`.
    pub fn retract(&self, eta: &TangentVector) -> Result<ObliquePoint> {
        normalize_columns(&self.0 + eta.matrix())
    }
}

/// A tangent vector at some [`ObliquePoint`]: each column is orthogonal to
/// the matching column of the base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(DMatrix<f64>);

impl TangentVector {
    pub fn zeros(d: usize, n: usize) -> Self {
        Self(DMatrix::zeros(d, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Frobenius inner product, the metric inherited from the ambient space.
    pub fn inner(&self, other: &TangentVector) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        Self(m)
    }
}

/// Divides every column by its Euclidean norm.
pub fn normalize_columns(mut m: DMatrix<f64>) -> Result<ObliquePoint> {
    for (j, mut col) in m.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > DEGENERATE_NORM) {
            return Err(Error::DegenerateColumn(j));
        }
        col /= norm;
    }
    Ok(ObliquePoint(m))
}

/// Column-wise projection onto the tangent space: `Gᵢ - (Xᵢᵀ Gᵢ) Xᵢ`.
pub fn project_tangent(x: &ObliquePoint, g: &DMatrix<f64>) -> TangentVector {
    assert_eq!(x.0.shape(), g.shape(), "project_tangent: shape mismatch");
    let mut out = g.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let base = x.0.column(j);
        let radial = base.dot(&col);
        col.axpy(-radial, &base, 1.0);
    }
    TangentVector(out)
}

/// Riemannian Hessian action from ambient quantities. Column `i` is
/// `P_{Xᵢ}( ehess_Uᵢ - (Xᵢᵀ egradᵢ) Uᵢ )`.
pub fn riemannian_hessian_action(
    x: &ObliquePoint,
    egrad: &DMatrix<f64>,
    ehess_u: &DMatrix<f64>,
    u: &TangentVector,
) -> TangentVector {
    let mut corrected = ehess_u.clone();
    for j in 0..corrected.ncols() {
        let radial = x.0.column(j).dot(&egrad.column(j));
        let uj = u.0.column(j);
        corrected.column_mut(j).axpy(-radial, &uj, 1.0);
    }
    project_tangent(x, &corrected)
}
