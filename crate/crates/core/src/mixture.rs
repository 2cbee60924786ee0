//! Weighted point sets on the unit hypersphere.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};

pub(crate) const UNIT_TOL: f64 = 1e-12;
pub(crate) const WEIGHT_TOL: f64 = 1e-12;

/// A Dirac mixture on `S^{d-1}`: `m` unit-norm columns with nonnegative
/// weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracMixture {
    points: DMatrix<f64>,
    weights: DVector<f64>,
}

impl DiracMixture {
    /// Validates the invariants. Columns within `1e-12` of unit norm are
    /// re-normalized to absorb rounding.
    pub fn new(mut points: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        if points.ncols() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} weights",
                points.ncols(),
                weights.len()
            )));
        }
        if points.ncols() == 0 {
            return Err(Error::InvalidMixture("mixture has no components".into()));
        }
        if points.nrows() < 2 {
            return Err(Error::InvalidMixture("points need at least two coordinates".into()));
        }
        for (j, mut col) in points.column_iter_mut().enumerate() {
            let norm = col.norm();
            if !((norm - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::InvalidMixture(format!("column {j} has norm {norm}, expected 1")));
            }
            col /= norm;
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMixture("weights must be finite and nonnegative".into()));
        }
        let total = weights.sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMixture(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { points, weights })
    }

    /// Equal weights `1/m`.
    pub fn uniform(points: DMatrix<f64>) -> Result<Self> {
        let m = points.ncols();
        Self::new(points, DVector::from_element(m, 1.0 / m as f64))
    }

    /// Normalizes weights that are merely proportional.
    pub fn from_unnormalized(points: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        let total = weights.sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidMixture(format!("weight total {total} is not positive")));
        }
        Self::new(points, weights / total)
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn point(&self, i: usize) -> DVectorView<'_, f64> {
        self.points.column(i)
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>) {
        (self.points, self.weights)
    }

    /// `Σ ωᵢ xᵢ`.
    pub fn resultant(&self) -> DVector<f64> {
        &self.points * &self.weights
    }

    /// Weighted scatter matrix `Σ ωᵢ xᵢ xᵢᵀ`.
    pub fn scatter(&self) -> DMatrix<f64> {
        let weighted = DMatrix::from_fn(self.dim(), self.len(), |r, c| self.points[(r, c)] * self.weights[c]);
        weighted * self.points.transpose()
    }

    /// Unit eigenvector of the largest scatter eigenvalue (sign arbitrary).
    pub fn principal_axis(&self) -> DVector<f64> {
        let eig = self.scatter().symmetric_eigen();
        let k = eig.eigenvalues.imax();
        eig.eigenvectors.column(k).into_owned()
    }

    /// Applies a `d×d` matrix (normally a rotation) to every point.
    pub fn transformed(&self, rotation: &DMatrix<f64>) -> Result<Self> {
        Self::new(rotation * &self.points, self.weights.clone())
    }

    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|x| *x == w)
    }
}
