//! Discrete Bayesian filter on the hypersphere whose posterior is a small
//! equally weighted Dirac mixture: propagate every (state, noise) pair,
//! reweight by the measurement likelihood, reapproximate back to `n` points.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};
use crate::manifold::ObliquePoint;
use crate::mixture::DiracMixture;
use crate::reapprox::{hdmr, hdmr_from, init_target, InitMethod, ReapproxConfig};
use crate::rng::derive_seed;

const DRIFT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub posterior: DiracMixture,
    pub t: usize,
}

impl FilterState {
    pub fn new(posterior: DiracMixture) -> Self {
        Self { posterior, t: 0 }
    }
}

/// `x_{t+1} = a(x_t, w_t)` with a fixed Dirac noise set.
pub struct SystemModel<F> {
    pub transition: F,
    pub noise: DiracMixture,
}

/// `ln f(z | x)`; `-∞` marks impossible states.
pub struct MeasurementModel<L> {
    pub log_likelihood: L,
}

/// Cartesian product of posterior and noise components pushed through the
/// transition. Component `r = i·n_w + k` pairs state `i` with noise `k`.
pub fn predict<F>(state: &FilterState, sys: &SystemModel<F>) -> Result<DiracMixture>
where
    F: Fn(DVectorView<'_, f64>, DVectorView<'_, f64>) -> Result<DVector<f64>>,
{
    let post = &state.posterior;
    let noise = &sys.noise;
    if post.dim() != noise.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state d={}, noise d={}",
            post.dim(),
            noise.dim()
        )));
    }
    let d = post.dim();
    let nw = noise.len();
    let np = post.len() * nw;
    let mut pts = DMatrix::zeros(d, np);
    let mut w = DVector::zeros(np);
    let mut drifted = 0;
    for i in 0..post.len() {
        for k in 0..nw {
            let r = i * nw + k;
            let mut y = (sys.transition)(post.point(i), noise.point(k))?;
            let norm = y.norm();
            if (norm - 1.0).abs() > DRIFT_TOL {
                drifted += 1;
                y /= norm;
            }
            pts.set_column(r, &y);
            w[r] = post.weights()[i] * noise.weights()[k];
        }
    }
    if drifted > 0 {
        log::warn!("{drifted} propagated points left the sphere and were renormalized");
    }
    DiracMixture::from_unnormalized(pts, w)
}

/// Bayes reweighting of `prior` by the likelihood of `z`.
pub fn update<Z: ?Sized, L>(prior: &DiracMixture, meas: &MeasurementModel<L>, z: &Z) -> Result<DiracMixture>
where
    L: Fn(&Z, DVectorView<'_, f64>) -> f64,
{
    let logw: Vec<f64> = (0..prior.len())
        .map(|r| prior.weights()[r].ln() + (meas.log_likelihood)(z, prior.point(r)))
        .collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateUpdate);
    }
    let w = DVector::from_iterator(logw.len(), logw.iter().map(|l| (l - max).exp()));
    DiracMixture::from_unnormalized(prior.points().clone(), w)
}

/// One predict / update / reapproximate cycle.
pub fn step<F, Z: ?Sized, L>(
    state: &FilterState,
    sys: &SystemModel<F>,
    meas: &MeasurementModel<L>,
    z: &Z,
    cfg: &ReapproxConfig,
) -> Result<FilterState>
where
    F: Fn(DVectorView<'_, f64>, DVectorView<'_, f64>) -> Result<DVector<f64>>,
    L: Fn(&Z, DVectorView<'_, f64>) -> f64,
{
    let prior = predict(state, sys)?;
    let posterior = update(&prior, meas, z)?;
    let t = state.t + 1;
    let step_cfg = ReapproxConfig {
        seed: derive_seed(cfg.seed, &format!("hrdf/step/{t}")),
        ..cfg.clone()
    };

    let solved = if state.posterior.len() == cfg.n_target {
        let x0 = ObliquePoint::new(state.posterior.points().clone())?;
        hdmr_from(&posterior, &step_cfg, x0)
    } else {
        let first = ReapproxConfig {
            init: InitMethod::WeightedSubsample,
            ..step_cfg.clone()
        };
        hdmr(&posterior, &first)
    };
    let next = match solved {
        Ok((target, _)) => target,
        Err(e @ Error::Config(_)) => return Err(e),
        Err(e) => {
            log::warn!("reapproximation failed at step {t} ({e}); resampling the posterior instead");
            let fallback = ReapproxConfig {
                init: InitMethod::WeightedSubsample,
                ..step_cfg
            };
            DiracMixture::uniform(init_target(&posterior, &fallback)?.into_matrix())?
        }
    };
    Ok(FilterState { posterior: next, t })
}

/// `normalize(Σᵢ νᵢ xᵢ)`.
pub fn point_estimate(state: &FilterState) -> Result<DVector<f64>> {
    let r = state.posterior.resultant();
    let norm = r.norm();
    if !(norm > 1e-9) {
        return Err(Error::NearZeroResultant(norm));
    }
    Ok(r / norm)
}
