//! Deterministic near-uniform point sets on `S²` and `S³`, used as
//! quadrature nodes and as density-weighted source sets.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};
use crate::mixture::DiracMixture;

/// Spherical Fibonacci lattice with `count` nodes on `S²`.
pub fn fibonacci_s2(count: usize) -> DMatrix<f64> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let n = count as f64;
    DMatrix::from_fn(3, count, |row, i| {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = 2.0 * PI * (i as f64 / golden).fract();
        match row {
            0 => r * phi.cos(),
            1 => r * phi.sin(),
            _ => z,
        }
    })
}

/// Super-Fibonacci spiral with `count` nodes on `S³` (Alexa, 2022).
pub fn super_fibonacci_s3(count: usize) -> DMatrix<f64> {
    const PHI: f64 = std::f64::consts::SQRT_2;
    const PSI: f64 = 1.533_751_168_755_204_3;
    let n = count as f64;
    let mut m = DMatrix::zeros(4, count);
    for i in 0..count {
        let s = i as f64 + 0.5;
        let r = (s / n).sqrt();
        let big_r = (1.0 - s / n).sqrt();
        let alpha = 2.0 * PI * s / PHI;
        let beta = 2.0 * PI * s / PSI;
        m[(0, i)] = r * alpha.sin();
        m[(1, i)] = r * alpha.cos();
        m[(2, i)] = big_r * beta.sin();
        m[(3, i)] = big_r * beta.cos();
    }
    m
}

/// Near-uniform lattice on `S^{d-1}` for `d ∈ {3, 4}`.
pub fn sphere_lattice(d: usize, count: usize) -> Result<DMatrix<f64>> {
    match d {
        3 => Ok(fibonacci_s2(count)),
        4 => Ok(super_fibonacci_s3(count)),
        _ => Err(domain(
            "sphere_lattice",
            format!("lattices exist for d = 3 or 4, not {d}"),
        )),
    }
}

/// Lattice nodes weighted by a density given in log form, normalized to sum
/// to one. Weights are computed by log-sum-exp, so only nodes whose density
/// is exactly zero (`-inf`) drop out.
pub fn density_weighted_lattice<F>(d: usize, log_density: F, count: usize) -> Result<DiracMixture>
where
    F: Fn(&[f64]) -> f64,
{
    if count < 10 {
        return Err(domain("density_weighted_lattice", format!("count {count} < 10")));
    }
    let nodes = sphere_lattice(d, count)?;
    let logs: Vec<f64> = nodes.column_iter().map(|c| log_density(c.as_slice())).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::ZeroDensity);
    }
    let raw: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights = DVector::from_iterator(count, raw.into_iter().map(|w| w / total));
    let mut mix = DiracMixture::new(nodes, weights.clone());
    if mix.is_err() {
        // renormalize once more in case the division left an ulp of drift
        mix = DiracMixture::from_unnormalized(sphere_lattice(d, count)?, weights);
    }
    mix
}
