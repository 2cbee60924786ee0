//! Density reconstruction from a reapproximated point set: a von
//! Mises–Fisher mixture centred on the target points with one shared
//! concentration, fitted to the source by maximum likelihood.

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lattice::fibonacci_s2;
use crate::mixture::DiracMixture;
use crate::reapprox::{hdmr, ReapproxConfig};
use crate::rtr::SolveReport;
use crate::specfn::{
    bessel_ratio, bessel_ratio_deriv, bessel_ratio_deriv_at_zero, inv_bessel_ratio, log_sphere_area, vmf_log_norm,
};

/// Largest argument passed to the inverse Bessel ratio.
const RATIO_CAP: f64 = 1.0 - 1e-12;

/// Equally weighted vMF mixture with a shared concentration.
#[derive(Debug, Clone, PartialEq)]
pub struct VmfMixture {
    means: DMatrix<f64>,
    lambda: f64,
    log_norm: f64,
}

impl VmfMixture {
    pub fn new(means: DMatrix<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(domain(
                "VmfMixture::new",
                format!("concentration {lambda} must be finite and > 0"),
            ));
        }
        let means = DiracMixture::uniform(means)?.into_parts().0;
        let log_norm = vmf_log_norm(means.nrows(), lambda)?;
        Ok(Self {
            means,
            lambda,
            log_norm,
        })
    }

    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.means.nrows()
    }

    pub fn len(&self) -> usize {
        self.means.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.means.ncols() == 0
    }

    pub fn logpdf(&self, x: DVectorView<'_, f64>) -> f64 {
        let dots = self.means.tr_mul(&x);
        let max = dots.max();
        let sum: f64 = dots.iter().map(|&t| (self.lambda * (t - max)).exp()).sum();
        self.log_norm + self.lambda * max + (sum / self.len() as f64).ln()
    }
}

/// `ln f_vMFM(x)` for the mixture.
pub fn vmfm_logpdf(mix: &VmfMixture, x: DVectorView<'_, f64>) -> f64 {
    mix.logpdf(x)
}

/// Named reference densities used to score reconstructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceDensity {
    Vmf {
        mean: Vec<f64>,
        lambda: f64,
    },
    /// Components with individual concentrations and (unnormalized) weights;
    /// equal weights when `weights` is omitted.
    VmfMixture {
        means: Vec<Vec<f64>>,
        lambdas: Vec<f64>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// `∝ exp(xᵀ diag(c) x)` on `S²`, normalized numerically.
    Bingham {
        diag: Vec<f64>,
    },
}

/// A [`ReferenceDensity`] with normalizers resolved.
#[derive(Debug, Clone)]
pub struct LogDensity {
    comps: Vec<(DVector<f64>, f64, f64)>, // (mean, λ, ln weight + ln C(λ))
    bingham: Option<(DVector<f64>, f64)>,
    d: usize,
}

fn unit(v: &[f64]) -> Result<DVector<f64>> {
    let v = DVector::from_column_slice(v);
    let n = v.norm();
    if !(n > 0.0) {
        return Err(Error::Config("reference mean must be nonzero".into()));
    }
    Ok(v / n)
}

impl ReferenceDensity {
    pub fn resolve(&self) -> Result<LogDensity> {
        match self {
            ReferenceDensity::Vmf { mean, lambda } => {
                let mu = unit(mean)?;
                let d = mu.len();
                Ok(LogDensity {
                    comps: vec![(mu, *lambda, vmf_log_norm(d, *lambda)?)],
                    bingham: None,
                    d,
                })
            }
            ReferenceDensity::VmfMixture {
                means,
                lambdas,
                weights,
            } => {
                if means.len() != lambdas.len() || means.is_empty() {
                    return Err(Error::Config("vmf_mixture needs one lambda per mean".into()));
                }
                let w = weights.clone().unwrap_or_else(|| vec![1.0; means.len()]);
                if w.len() != means.len() || w.iter().any(|x| !(*x >= 0.0)) {
                    return Err(Error::Config(
                        "vmf_mixture weights must be nonnegative, one per mean".into(),
                    ));
                }
                let total: f64 = w.iter().sum();
                let mut comps = Vec::new();
                for ((m, &l), &wi) in means.iter().zip(lambdas).zip(&w) {
                    let mu = unit(m)?;
                    let c = (wi / total).ln() + vmf_log_norm(mu.len(), l)?;
                    comps.push((mu, l, c));
                }
                let d = comps[0].0.len();
                if comps.iter().any(|c| c.0.len() != d) {
                    return Err(Error::Config("vmf_mixture means differ in dimension".into()));
                }
                Ok(LogDensity {
                    comps,
                    bingham: None,
                    d,
                })
            }
            ReferenceDensity::Bingham { diag } => {
                if diag.len() != 3 {
                    return Err(Error::Config(
                        "bingham reference is supported on S² (three diagonal entries)".into(),
                    ));
                }
                let c = DVector::from_column_slice(diag);
                let nodes = fibonacci_s2(200_000);
                let exps: Vec<f64> = nodes
                    .column_iter()
                    .map(|x| x.iter().zip(c.iter()).map(|(a, b)| a * a * b).sum())
                    .collect();
                let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = exps.iter().map(|e| (e - max).exp()).sum();
                let log_z = max + (s / nodes.ncols() as f64).ln() + log_sphere_area(3);
                Ok(LogDensity {
                    comps: Vec::new(),
                    bingham: Some((c, log_z)),
                    d: 3,
                })
            }
        }
    }
}

impl LogDensity {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn logpdf(&self, x: DVectorView<'_, f64>) -> f64 {
        if let Some((c, log_z)) = &self.bingham {
            return x.iter().zip(c.iter()).map(|(a, b)| a * a * b).sum::<f64>() - log_z;
        }
        let terms: Vec<f64> = self.comps.iter().map(|(mu, l, c)| c + l * mu.dot(&x)).collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }
}

/// Hellinger distance between two densities on `S²` by equal-area
/// Fibonacci-lattice quadrature. The Bhattacharyya sum is divided by the
/// quadrature masses of both densities, so lattice error in the
/// normalization does not show up as a spurious distance.
pub fn hellinger_s2<F, G>(f_log: F, g_log: G, lattice_size: usize) -> f64
where
    F: Fn(DVectorView<'_, f64>) -> f64,
    G: Fn(DVectorView<'_, f64>) -> f64,
{
    let nodes = fibonacci_s2(lattice_size);
    let (mut mf, mut mg, mut bc) = (0.0, 0.0, 0.0);
    for x in nodes.column_iter() {
        let (a, b) = (f_log(x), g_log(x));
        mf += a.exp();
        mg += b.exp();
        bc += (0.5 * (a + b)).exp();
    }
    (1.0 - bc / (mf * mg).sqrt()).max(0.0).sqrt()
}

/// Per-source-point moments of `xᵢᵀx̊ᵣ` under the softmax weights
/// `∝ exp(λ xᵢᵀx̊ᵣ)`, accumulated over `r`: `(Σ ω̊ m₁, Σ ω̊ (m₂ - m₁²), Σ ω̊ lse)`.
fn moments(lambda: f64, gram: &DMatrix<f64>, source_w: &DVector<f64>) -> (f64, f64, f64) {
    let n = gram.nrows();
    let mut first = 0.0;
    let mut var = 0.0;
    let mut lse_total = 0.0;
    for (r, col) in gram.column_iter().enumerate() {
        let max = col.max();
        let mut z = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for &t in col.iter() {
            let e = (lambda * (t - max)).exp();
            z += e;
            m1 += e * t;
            m2 += e * t * t;
        }
        m1 /= z;
        m2 /= z;
        first += source_w[r] * m1;
        var += source_w[r] * (m2 - m1 * m1).max(0.0);
        lse_total += source_w[r] * (lambda * max + (z / n as f64).ln());
    }
    (first, var, lse_total)
}

fn gram(target: &DiracMixture, source: &DiracMixture) -> Result<DMatrix<f64>> {
    if target.dim() != source.dim() {
        return Err(Error::DimensionMismatch(format!(
            "target d={}, source d={}",
            target.dim(),
            source.dim()
        )));
    }
    Ok(target.points().tr_mul(source.points())) // [i, r]
}

fn derivs_at(d: usize, lambda: f64, g: &DMatrix<f64>, w: &DVector<f64>) -> Result<(f64, f64)> {
    let (m1, var, _) = moments(lambda, g, w);
    if lambda == 0.0 {
        return Ok((m1, var - bessel_ratio_deriv_at_zero(d)));
    }
    Ok((m1 - bessel_ratio(d, lambda)?, var - bessel_ratio_deriv(d, lambda)?))
}

/// Source log-likelihood `ℓ(λ) = Σᵣ ω̊ᵣ ln f_vMFM(x̊ᵣ)` of the mixture centred
/// on `target`.
pub fn loglik(lambda: f64, target: &DiracMixture, source: &DiracMixture) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(domain("loglik", format!("concentration {lambda} must be > 0")));
    }
    let g = gram(target, source)?;
    let (_, _, lse) = moments(lambda, &g, source.weights());
    Ok(lse + vmf_log_norm(target.dim(), lambda)?)
}

/// `(ℓ'(λ), ℓ''(λ))`.
pub fn loglik_derivs(lambda: f64, target: &DiracMixture, source: &DiracMixture) -> Result<(f64, f64)> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(domain(
            "loglik_derivs",
            format!("concentration {lambda} must be finite and > 0"),
        ));
    }
    let g = gram(target, source)?;
    derivs_at(target.dim(), lambda, &g, source.weights())
}

/// `(λ_min, λ_max, λ₀)` from the average and the best alignment of each
/// source point with the target points.
pub fn lambda_bounds(target: &DiracMixture, source: &DiracMixture) -> Result<(f64, f64, f64)> {
    let g = gram(target, source)?;
    let d = target.dim();
    let w = source.weights();
    let n = g.nrows() as f64;
    let mut mean_arg = 0.0;
    let mut max_arg = 0.0;
    for (r, col) in g.column_iter().enumerate() {
        mean_arg += w[r] * col.sum() / n;
        max_arg += w[r] * col.max();
    }
    let inv = |a: f64| -> Result<f64> {
        if a <= 0.0 {
            Ok(0.0)
        } else {
            inv_bessel_ratio(d, a.min(RATIO_CAP))
        }
    };
    let lo = inv(mean_arg)?;
    let hi = inv(max_arg)?.max(lo);
    Ok((lo, hi, 0.5 * (lo + hi)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleState {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda0: f64,
    /// `(λ, ℓ'(λ))` at every evaluated iterate.
    pub iterates: Vec<(f64, f64)>,
    pub converged: bool,
    /// Times an initial bound had the wrong derivative sign and the
    /// bracket was widened.
    pub bracket_violations: usize,
    pub bisections: usize,
}

/// Safeguarded Newton iteration for the root of `ℓ'`.
pub fn fit_lambda(target: &DiracMixture, source: &DiracMixture, tol: f64, max_iters: usize) -> Result<(f64, MleState)> {
    let (lambda_min, lambda_max, lambda0) = lambda_bounds(target, source)?;
    let g = gram(target, source)?;
    let d = target.dim();
    let w = source.weights();
    let lp = |l: f64| derivs_at(d, l, &g, w);

    let mut state = MleState {
        lambda_min,
        lambda_max,
        lambda0,
        iterates: Vec::new(),
        converged: false,
        bracket_violations: 0,
        bisections: 0,
    };

    let (mut lambda, (mut l1, mut l2)) = (lambda0, lp(lambda0)?);
    state.iterates.push((lambda, l1));
    if l1.abs() <= tol {
        state.converged = true;
        return Ok((lambda, state));
    }

    let mut lo = lambda_min;
    let mut hi = lambda_max;
    if lp(lo)?.0 < 0.0 {
        state.bracket_violations += 1;
        log::debug!("l'(lambda_min) < 0; widening the bracket towards zero");
        lo = 0.0;
    }
    if lp(hi)?.0 > 0.0 {
        state.bracket_violations += 1;
        log::debug!("l'(lambda_max) > 0; widening the bracket upwards");
        let mut k = 0;
        while lp(hi)?.0 > 0.0 {
            lo = hi;
            hi = 2.0 * hi + 1.0;
            k += 1;
            if k > 60 {
                return Err(domain(
                    "fit_lambda",
                    "likelihood keeps increasing; source is degenerate",
                ));
            }
        }
    }
    if lp(lo)?.0 < 0.0 {
        // ℓ decreasing at zero: the uniform limit is the maximizer
        return Err(domain(
            "fit_lambda",
            "likelihood is maximal at zero concentration; the source looks uniform",
        ));
    }
    lambda = lambda.clamp(lo, hi);

    for _ in 0..max_iters {
        if l1 > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let newton = lambda - l1 / l2;
        lambda = if l2 < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            state.bisections += 1;
            0.5 * (lo + hi)
        };
        (l1, l2) = lp(lambda)?;
        state.iterates.push((lambda, l1));
        if l1.abs() <= tol {
            state.converged = true;
            break;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    if lambda == 0.0 {
        return Err(domain(
            "fit_lambda",
            "fitted concentration is zero; the source looks uniform",
        ));
    }
    Ok((lambda, state))
}

/// Reapproximation followed by the concentration fit.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub mixture: VmfMixture,
    pub mle: MleState,
    pub solve: SolveReport,
}

pub fn reconstruct(source: &DiracMixture, cfg: &ReapproxConfig) -> Result<Reconstruction> {
    let (target, solve) = hdmr(source, cfg)?;
    let (lambda, mle) = fit_lambda(&target, source, 1e-8, 100)?;
    if !mle.converged {
        log::warn!("concentration fit stopped at lambda = {lambda} without meeting the tolerance");
    }
    Ok(Reconstruction {
        mixture: VmfMixture::new(target.into_parts().0, lambda)?,
        mle,
        solve,
    })
}
