//! Riemannian trust-region minimization on the oblique manifold with a
//! truncated conjugate-gradient (Steihaug–Toint) inner solver, plus a plain
//! Armijo gradient-descent fallback.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hcvmd::{HcvmdEval, HcvmdObjective};
use crate::manifold::{normalize_columns, project_tangent, riemannian_hessian_action, ObliquePoint, TangentVector};

/// A smooth function on `d×n` matrices, evaluated in the ambient space.
pub trait Objective {
    /// Data computed with the gradient and reused by Hessian actions.
    type Cache;

    fn cost(&self, x: &DMatrix<f64>) -> Result<f64>;

    /// Value and ambient gradient.
    fn cost_grad(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)>;

    /// Value, ambient gradient and the Hessian cache.
    fn evaluate(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>, Self::Cache)>;

    /// Ambient Hessian applied to `u` at the point the cache was built for.
    fn ehess(&self, x: &DMatrix<f64>, cache: &Self::Cache, u: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

/// An [`Objective`] assembled from three closures.
pub struct FnObjective<F, G, H> {
    pub cost: F,
    pub egrad: G,
    pub ehess: H,
}

impl<F, G, H> Objective for FnObjective<F, G, H>
where
    F: Fn(&DMatrix<f64>) -> Result<f64>,
    G: Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>,
    H: Fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    type Cache = ();

    fn cost(&self, x: &DMatrix<f64>) -> Result<f64> {
        (self.cost)(x)
    }

    fn cost_grad(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        Ok(((self.cost)(x)?, (self.egrad)(x)?))
    }

    fn evaluate(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>, ())> {
        let (f, g) = self.cost_grad(x)?;
        Ok((f, g, ()))
    }

    fn ehess(&self, x: &DMatrix<f64>, _: &(), u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        (self.ehess)(x, u)
    }
}

impl Objective for HcvmdObjective {
    type Cache = HcvmdEval;

    fn cost(&self, x: &DMatrix<f64>) -> Result<f64> {
        self.value(x)
    }

    fn cost_grad(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        self.value_gradient(x)
    }

    fn evaluate(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>, HcvmdEval)> {
        HcvmdObjective::evaluate(self, x)
    }

    fn ehess(&self, x: &DMatrix<f64>, cache: &HcvmdEval, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.hess_action(x, cache, u))
    }
}

/// Solver settings. Size-dependent fields left as `None` resolve against
/// the problem: radius `0.1·√n`, maximum radius `√n`, `3·d·n` inner steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustRegionConfig {
    pub max_outer_iters: usize,
    pub grad_tol: f64,
    pub initial_radius: Option<f64>,
    pub max_radius: Option<f64>,
    pub rho_accept: f64,
    pub tcg_max_iters: Option<usize>,
    pub tcg_kappa: f64,
    pub tcg_theta: f64,
    /// Stop when the objective dropped by less than `stall_tol` (relative)
    /// over the last `stall_window` accepted steps.
    pub stall_window: usize,
    pub stall_tol: f64,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 200,
            grad_tol: 1e-8,
            initial_radius: None,
            max_radius: None,
            rho_accept: 0.1,
            tcg_max_iters: None,
            tcg_kappa: 0.1,
            tcg_theta: 1.0,
            stall_window: 10,
            stall_tol: 1e-12,
        }
    }
}

impl TrustRegionConfig {
    /// Lists every violated invariant.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.rho_accept > 0.0 && self.rho_accept < 0.25) {
            errs.push(format!("solver.rho_accept = {} must lie in (0, 0.25)", self.rho_accept));
        }
        if !(self.grad_tol > 0.0) {
            errs.push(format!("solver.grad_tol = {} must be positive", self.grad_tol));
        }
        for (name, v) in [("initial_radius", self.initial_radius), ("max_radius", self.max_radius)] {
            if let Some(r) = v {
                if !(r > 0.0) {
                    errs.push(format!("solver.{name} = {r} must be positive"));
                }
            }
        }
        if let (Some(a), Some(b)) = (self.initial_radius, self.max_radius) {
            if a > b {
                errs.push(format!("solver.initial_radius = {a} exceeds max_radius = {b}"));
            }
        }
        if !(self.tcg_kappa > 0.0) || !(self.tcg_theta > 0.0) {
            errs.push("solver.tcg_kappa and solver.tcg_theta must be positive".into());
        }
        if self.max_outer_iters == 0 {
            errs.push("solver.max_outer_iters must be at least 1".into());
        }
        if self.stall_window == 0 || !(self.stall_tol >= 0.0) {
            errs.push("solver.stall_window must be >= 1 and solver.stall_tol >= 0".into());
        }
        errs
    }

    fn resolved(&self, d: usize, n: usize) -> (f64, f64, usize) {
        let root_n = (n as f64).sqrt();
        let max_r = self.max_radius.unwrap_or(root_n);
        let r0 = self.initial_radius.unwrap_or(0.1 * root_n).min(max_r);
        (r0, max_r, self.tcg_max_iters.unwrap_or(3 * d * n).max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradTol,
    MaxIters,
    RadiusCollapse,
    /// Relative objective decrease over the stall window fell below
    /// tolerance.
    Stalled,
    /// Line search could not find an acceptable step (fallback solver).
    StepTol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_objective: f64,
    pub final_grad_norm: f64,
    /// Objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub termination: Termination,
    pub rejected_steps: usize,
    pub inner_iterations: usize,
}

struct TcgResult {
    eta: DMatrix<f64>,
    heta: DMatrix<f64>,
    at_boundary: bool,
    iterations: usize,
}

fn tcg<HF>(
    grad: &DMatrix<f64>,
    radius: f64,
    cfg: &TrustRegionConfig,
    max_iters: usize,
    mut hess: HF,
) -> Result<TcgResult>
where
    HF: FnMut(&DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let mut eta = DMatrix::zeros(grad.nrows(), grad.ncols());
    let mut heta = eta.clone();
    let mut r = grad.clone();
    let r0 = r.norm();
    let mut z_r = r.norm_squared();
    let mut delta = -&r;
    let mut e_pe = 0.0;
    let mut e_pd = 0.0;
    let mut d_pd = z_r;
    let mut model = 0.0;
    let radius2 = radius * radius;

    for j in 0..max_iters {
        let hdelta = hess(&delta)?;
        let d_hd = delta.dot(&hdelta);
        let alpha = z_r / d_hd;
        let e_pe_new = e_pe + 2.0 * alpha * e_pd + alpha * alpha * d_pd;

        if !(d_hd > 0.0) || e_pe_new >= radius2 {
            let tau = (-e_pd + (e_pd * e_pd + d_pd * (radius2 - e_pe)).max(0.0).sqrt()) / d_pd;
            eta += &delta * tau;
            heta += &hdelta * tau;
            return Ok(TcgResult {
                eta,
                heta,
                at_boundary: true,
                iterations: j + 1,
            });
        }

        let new_eta = &eta + &delta * alpha;
        let new_heta = &heta + &hdelta * alpha;
        let new_model = new_eta.dot(grad) + 0.5 * new_eta.dot(&new_heta);
        if new_model >= model {
            return Ok(TcgResult {
                eta,
                heta,
                at_boundary: false,
                iterations: j + 1,
            });
        }
        eta = new_eta;
        heta = new_heta;
        model = new_model;
        e_pe = e_pe_new;

        r += &hdelta * alpha;
        let r_norm = r.norm();
        if r_norm <= r0 * r0.powf(cfg.tcg_theta).min(cfg.tcg_kappa) {
            return Ok(TcgResult {
                eta,
                heta,
                at_boundary: false,
                iterations: j + 1,
            });
        }
        let z_r_old = z_r;
        z_r = r.norm_squared();
        let beta = z_r / z_r_old;
        delta = &delta * beta - &r;
        e_pd = beta * (e_pd + alpha * d_pd);
        d_pd = z_r + beta * beta * d_pd;
    }
    Ok(TcgResult {
        eta,
        heta,
        at_boundary: false,
        iterations: max_iters,
    })
}

fn stalled(trace: &[f64], window: usize, tol: f64) -> bool {
    if trace.len() <= window {
        return false;
    }
    let old = trace[trace.len() - 1 - window];
    let new = trace[trace.len() - 1];
    old - new <= tol * old.abs().max(f64::MIN_POSITIVE)
}

/// Minimizes `objective` over `OB(d, n)` from `x0`.
pub fn minimize<O: Objective>(
    objective: &O,
    x0: ObliquePoint,
    cfg: &TrustRegionConfig,
) -> Result<(ObliquePoint, SolveReport)> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs.join("; ")));
    }
    let (mut radius, max_radius, tcg_max) = cfg.resolved(x0.dim(), x0.count());

    let mut x = x0;
    let (mut f, mut egrad, mut cache) = objective.evaluate(x.matrix())?;
    let mut rgrad = project_tangent(&x, &egrad).into_matrix();
    let mut gnorm = rgrad.norm();
    let mut trace = vec![f];
    let mut rejected = 0;
    let mut inner = 0;
    let mut termination = Termination::MaxIters;
    let mut iterations = cfg.max_outer_iters;

    for k in 0..cfg.max_outer_iters {
        if gnorm <= cfg.grad_tol {
            termination = Termination::GradTol;
            iterations = k + 1;
            break;
        }

        let step = {
            let x_ref = &x;
            let eg = &egrad;
            let c = &cache;
            tcg(&rgrad, radius, cfg, tcg_max, |u| {
                let eh = objective.ehess(x_ref.matrix(), c, u)?;
                let ut = TangentVector::from_matrix_unchecked(u.clone());
                Ok(riemannian_hessian_action(x_ref, eg, &eh, &ut).into_matrix())
            })?
        };
        inner += step.iterations;

        let candidate = normalize_columns(x.matrix() + &step.eta)?;
        let f_new = objective.cost(candidate.matrix())?;
        let model_decrease = -(step.eta.dot(&rgrad) + 0.5 * step.eta.dot(&step.heta));
        let reg = 1e3 * f64::EPSILON * f.abs().max(1.0);
        let rho = (f - f_new + reg) / (model_decrease + reg);

        if !(rho >= 0.25) {
            radius *= 0.25;
        } else if rho > 0.75 && step.at_boundary {
            radius = (2.0 * radius).min(max_radius);
        }

        if rho > cfg.rho_accept && f_new <= f {
            x = candidate;
            let (_, g2, c2) = objective.evaluate(x.matrix())?;
            f = f_new;
            egrad = g2;
            cache = c2;
            rgrad = project_tangent(&x, &egrad).into_matrix();
            gnorm = rgrad.norm();
            trace.push(f);
            if stalled(&trace, cfg.stall_window, cfg.stall_tol) {
                termination = if gnorm <= cfg.grad_tol {
                    Termination::GradTol
                } else {
                    Termination::Stalled
                };
                iterations = k + 1;
                break;
            }
        } else {
            rejected += 1;
        }

        if radius < 1e-14 {
            termination = Termination::RadiusCollapse;
            iterations = k + 1;
            break;
        }
    }
    log::debug!(
        "trust region: {iterations} outer / {inner} inner iterations, f = {f:e}, |grad| = {gnorm:e}, {termination:?}"
    );
    let report = SolveReport {
        iterations,
        final_objective: f,
        final_grad_norm: gnorm,
        objective_trace: trace,
        termination,
        rejected_steps: rejected,
        inner_iterations: inner,
    };
    Ok((x, report))
}

/// Riemannian gradient descent with Armijo backtracking along the projected
/// gradient and the normalization retraction. Trial step lengths come from
/// the Barzilai–Borwein quotient of the last two iterates. Stops when the
/// gradient norm or the accepted step length falls below `step_tol`.
pub fn gradient_descent_fallback<O: Objective>(
    objective: &O,
    x0: ObliquePoint,
    step_tol: f64,
    max_iters: usize,
) -> Result<(ObliquePoint, SolveReport)> {
    let mut x = x0;
    let (mut f, eg) = objective.cost_grad(x.matrix())?;
    let mut rgrad = project_tangent(&x, &eg).into_matrix();
    let mut gnorm = rgrad.norm();
    let mut trace = vec![f];
    let mut t = 1.0 / gnorm.max(1.0);
    let mut termination = Termination::MaxIters;
    let mut iterations = max_iters;
    let mut rejected = 0;

    for k in 0..max_iters {
        if gnorm <= step_tol {
            termination = Termination::GradTol;
            iterations = k + 1;
            break;
        }
        let mut accepted = None;
        while t * gnorm >= step_tol {
            let cand = normalize_columns(x.matrix() - &rgrad * t)?;
            let fc = objective.cost(cand.matrix())?;
            if fc <= f - 1e-4 * t * gnorm * gnorm {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
            rejected += 1;
        }
        let Some((cand, fc)) = accepted else {
            termination = Termination::StepTol;
            iterations = k + 1;
            break;
        };
        let step = cand.matrix() - x.matrix();
        x = cand;
        // keep the value the acceptance test saw; cost_grad may sum in a
        // different order and differ in the last bits
        let (_, eg) = objective.cost_grad(x.matrix())?;
        f = fc;
        let new_rgrad = project_tangent(&x, &eg).into_matrix();
        let sy = step.dot(&(&new_rgrad - &rgrad));
        t = if sy > 0.0 { step.norm_squared() / sy } else { 2.0 * t };
        rgrad = new_rgrad;
        gnorm = rgrad.norm();
        trace.push(f);
    }
    let report = SolveReport {
        iterations,
        final_objective: f,
        final_grad_norm: gnorm,
        objective_trace: trace,
        termination,
        rejected_steps: rejected,
        inner_iterations: 0,
    };
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::sampling::uniform_sphere;

    // f(X) = Σᵢ (1 - aᵢᵀXᵢ)
    fn linear(a: DMatrix<f64>) -> impl Objective<Cache = ()> {
        let a2 = a.clone();
        let n = a.ncols() as f64;
        FnObjective {
            cost: move |x: &DMatrix<f64>| Ok(n - a.dot(x)),
            egrad: move |_: &DMatrix<f64>| Ok(-a2.clone()),
            ehess: |_: &DMatrix<f64>, u: &DMatrix<f64>| Ok(DMatrix::zeros(u.nrows(), u.ncols())),
        }
    }

    #[test]
    fn converges_on_linear_sphere_objective() {
        let mut rng = rng_from_seed(1);
        let a = uniform_sphere(3, 6, &mut rng);
        let x0 = ObliquePoint::new(uniform_sphere(3, 6, &mut rng)).unwrap();
        let (x, rep) = minimize(&linear(a.clone()), x0, &TrustRegionConfig::default()).unwrap();
        assert_eq!(rep.termination, Termination::GradTol);
        assert!(rep.final_grad_norm <= 1e-8);
        assert!(rep.iterations <= 30, "{} iterations", rep.iterations);
        assert!((x.matrix() - &a).amax() < 1e-8);
        assert!(rep.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn stationary_start_returns_after_one_iteration() {
        let mut rng = rng_from_seed(2);
        let a = uniform_sphere(4, 3, &mut rng);
        let x0 = ObliquePoint::new(a.clone()).unwrap();
        let (x, rep) = minimize(&linear(a.clone()), x0.clone(), &TrustRegionConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(x, x0);
        let (x, rep) = gradient_descent_fallback(&linear(a), x0.clone(), 1e-10, 100).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(x, x0);
    }

    #[test]
    fn fallback_reaches_same_minimizer() {
        let mut rng = rng_from_seed(3);
        let a = uniform_sphere(3, 4, &mut rng);
        let x0 = ObliquePoint::new(uniform_sphere(3, 4, &mut rng)).unwrap();
        let (x, rep) = gradient_descent_fallback(&linear(a.clone()), x0, 1e-10, 10_000).unwrap();
        assert!((x.matrix() - &a).amax() < 1e-6, "{:?}", rep.termination);
        assert!(rep.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn callback_errors_propagate() {
        let obj = FnObjective {
            cost: |_: &DMatrix<f64>| Err(Error::Callback("boom".into())),
            egrad: |x: &DMatrix<f64>| Ok(x.clone()),
            ehess: |_: &DMatrix<f64>, u: &DMatrix<f64>| Ok(u.clone()),
        };
        let x0 = ObliquePoint::new(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
        assert!(matches!(
            minimize(&obj, x0, &TrustRegionConfig::default()),
            Err(Error::Callback(_))
        ));
    }

    #[test]
    fn config_validation_lists_all_problems() {
        let cfg = TrustRegionConfig {
            rho_accept: 0.3,
            grad_tol: -1.0,
            ..Default::default()
        };
        assert_eq!(cfg.validate().len(), 2);
        assert!(TrustRegionConfig::default().validate().is_empty());
    }
}
