//! Reapproximation of a weighted Dirac mixture by `n` equally weighted points
//! that minimize the hyperspherical Cramér–von Mises distance.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample_weighted;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hcvmd::{epsilon_for, hcvmd_source_term, HcvmdObjective, HcvmdParams};
use crate::manifold::ObliquePoint;
use crate::mixture::DiracMixture;
use crate::rng::derived_rng;
use crate::rtr::{gradient_descent_fallback, minimize, Objective, SolveReport, Termination, TrustRegionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    /// `n` source indices drawn without replacement, probability ∝ weight.
    #[default]
    WeightedSubsample,
    /// Greedy max-min geodesic spread starting at the heaviest point.
    FarthestPoint,
    /// Starting points supplied by the caller through [`hdmr_from`].
    UserProvided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReapproxConfig {
    pub n_target: usize,
    pub init: InitMethod,
    pub seed: u64,
    pub epsilon_override: Option<f64>,
    pub solver: TrustRegionConfig,
}

impl Default for ReapproxConfig {
    fn default() -> Self {
        Self {
            n_target: 20,
            init: InitMethod::default(),
            seed: 0,
            epsilon_override: None,
            solver: TrustRegionConfig::default(),
        }
    }
}

impl ReapproxConfig {
    pub fn new(n_target: usize, seed: u64) -> Self {
        Self {
            n_target,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.n_target == 0 {
            errs.push("reapprox.n_target must be at least 1".into());
        }
        if let Some(e) = self.epsilon_override {
            if !(e > 2.0) || !e.is_finite() {
                errs.push(format!("reapprox.epsilon_override = {e} must be > 2"));
            }
        }
        errs.extend(self.solver.validate().into_iter().map(|e| format!("reapprox.{e}")));
        errs
    }

    /// `ε` used for a `d`-dimensional problem.
    pub fn epsilon(&self, d: usize) -> f64 {
        self.epsilon_override.unwrap_or_else(|| epsilon_for(d, self.n_target))
    }
}

/// Result of [`hdmr_detailed`].
#[derive(Debug, Clone)]
pub struct ReapproxOutcome {
    pub target: DiracMixture,
    pub initial: DiracMixture,
    pub report: SolveReport,
    pub epsilon: f64,
    /// Distance of the initialization and of the result to the source.
    pub distance_before: f64,
    pub distance_after: f64,
    pub used_fallback: bool,
}

/// Index of the single location carrying all the mass, if there is one.
fn degenerate_location(source: &DiracMixture) -> Option<usize> {
    let w = source.weights();
    let first = w.iter().position(|&x| x > 0.0)?;
    let anchor = source.point(first);
    source
        .points()
        .column_iter()
        .zip(w.iter())
        .all(|(c, &x)| x == 0.0 || c.dot(&anchor) >= 1.0 - 1e-15)
        .then_some(first)
}

fn gather(source: &DiracMixture, idx: &[usize]) -> Result<ObliquePoint> {
    let pts = source.points();
    ObliquePoint::new(DMatrix::from_fn(pts.nrows(), idx.len(), |r, c| pts[(r, idx[c])]))
}

fn weighted_subsample_indices(source: &DiracMixture, n: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = derived_rng(seed, "reapprox/init");
    let w = source.weights();
    let m = source.len();
    let mut idx: Vec<usize> = sample_weighted(&mut rng, m, |i| w[i], n.min(m))
        .map_err(|e| Error::InvalidMixture(format!("weighted subsampling failed: {e}")))?
        .into_vec();
    idx.sort_unstable();
    if idx.len() < n {
        // fewer usable source points than requested: top up with replacement
        let dist = WeightedIndex::new(w.iter().copied())
            .map_err(|e| Error::InvalidMixture(format!("weighted sampling failed: {e}")))?;
        while idx.len() < n {
            idx.push(dist.sample(&mut rng));
        }
    }
    Ok(idx)
}

fn farthest_point_indices(source: &DiracMixture, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = derived_rng(seed, "reapprox/init");
    let w = source.weights();
    let m = source.len();
    let top = w.max();
    let modes: Vec<usize> = (0..m).filter(|&i| w[i] == top).collect();
    let first = modes[rng.random_range(0..modes.len())];

    let pts = source.points();
    let mut picked = vec![first];
    // largest inner product with any picked point = smallest geodesic distance
    let mut closest: Vec<f64> = (0..m).map(|j| pts.column(j).dot(&pts.column(first))).collect();
    while picked.len() < n {
        let next = (0..m)
            .filter(|&j| w[j] > 0.0)
            .min_by(|&a, &b| closest[a].total_cmp(&closest[b]))
            .unwrap_or(first);
        picked.push(next);
        for (j, c) in closest.iter_mut().enumerate() {
            *c = c.max(pts.column(j).dot(&pts.column(next)));
        }
    }
    picked
}

/// Starting configuration for [`hdmr`].
pub fn init_target(source: &DiracMixture, cfg: &ReapproxConfig) -> Result<ObliquePoint> {
    let n = cfg.n_target;
    match cfg.init {
        InitMethod::WeightedSubsample => gather(source, &weighted_subsample_indices(source, n, cfg.seed)?),
        InitMethod::FarthestPoint => gather(source, &farthest_point_indices(source, n, cfg.seed)),
        InitMethod::UserProvided => Err(Error::Config(
            "init = user_provided needs starting points; call hdmr_from".into(),
        )),
    }
}

fn check_config(source: &DiracMixture, cfg: &ReapproxConfig) -> Result<()> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs.join("; ")));
    }
    if source.dim() < 3 {
        return Err(Error::DimensionMismatch(format!(
            "reapproximation needs d >= 3, source has d = {}",
            source.dim()
        )));
    }
    if cfg.n_target > source.len() {
        log::warn!(
            "target size {} exceeds the {} source components; initialization samples with replacement",
            cfg.n_target,
            source.len()
        );
    }
    Ok(())
}

/// Reapproximates `source` by `cfg.n_target` equally weighted points.
pub fn hdmr(source: &DiracMixture, cfg: &ReapproxConfig) -> Result<(DiracMixture, SolveReport)> {
    let run = solve(source, cfg, None)?;
    Ok((run.target, run.report))
}

/// [`hdmr`] from caller-supplied starting points.
pub fn hdmr_from(source: &DiracMixture, cfg: &ReapproxConfig, x0: ObliquePoint) -> Result<(DiracMixture, SolveReport)> {
    let run = solve(source, cfg, Some(x0))?;
    Ok((run.target, run.report))
}

/// Reapproximation with distances before and after optimization. Costs one
/// extra pass over all source pairs for the constant term.
pub fn hdmr_detailed(source: &DiracMixture, cfg: &ReapproxConfig, x0: Option<ObliquePoint>) -> Result<ReapproxOutcome> {
    let run = solve(source, cfg, x0)?;
    let params = HcvmdParams::new(source.dim(), run.epsilon, cfg.n_target)?;
    let d3 = hcvmd_source_term(source, &params)?;
    Ok(ReapproxOutcome {
        distance_before: run.initial_objective + d3,
        distance_after: run.report.final_objective + d3,
        target: run.target,
        initial: run.initial,
        report: run.report,
        epsilon: run.epsilon,
        used_fallback: run.used_fallback,
    })
}

struct Run {
    target: DiracMixture,
    initial: DiracMixture,
    report: SolveReport,
    epsilon: f64,
    initial_objective: f64,
    used_fallback: bool,
}

fn solve(source: &DiracMixture, cfg: &ReapproxConfig, x0: Option<ObliquePoint>) -> Result<Run> {
    check_config(source, cfg)?;
    let n = cfg.n_target;
    let d = source.dim();
    let epsilon = cfg.epsilon(d);
    let params = HcvmdParams::new(d, epsilon, n)?;
    let weights = DVector::from_element(n, 1.0 / n as f64);

    let x0 = match x0 {
        Some(x) => {
            if x.dim() != d || x.count() != n {
                return Err(Error::DimensionMismatch(format!(
                    "starting points are {}x{}, expected {d}x{n}",
                    x.dim(),
                    x.count()
                )));
            }
            x
        }
        None => init_target(source, cfg)?,
    };
    let initial = DiracMixture::new(x0.matrix().clone(), weights.clone())?;
    let objective = HcvmdObjective::new(source.clone(), weights.clone(), params)?;
    let f0 = objective.cost(x0.matrix())?;

    if let Some(k) = degenerate_location(source) {
        let pts = DMatrix::from_fn(d, n, |r, _| source.points()[(r, k)]);
        let target = DiracMixture::new(pts, weights)?;
        let f = objective.cost(target.points())?;
        let report = SolveReport {
            iterations: 0,
            final_objective: f,
            final_grad_norm: 0.0,
            objective_trace: vec![f],
            termination: Termination::GradTol,
            rejected_steps: 0,
            inner_iterations: 0,
        };
        return Ok(Run {
            target,
            initial,
            report,
            epsilon,
            initial_objective: f0,
            used_fallback: false,
        });
    }

    let mut used_fallback = false;
    let gd_iters = 10 * cfg.solver.max_outer_iters;
    let (x, report) = match minimize(&objective, x0.clone(), &cfg.solver) {
        Ok((x, rep))
            if rep.termination != Termination::RadiusCollapse || rep.final_grad_norm <= cfg.solver.grad_tol =>
        {
            (x, rep)
        }
        Ok((x, rep)) => {
            log::warn!(
                "trust region collapsed at |grad| = {:e}; continuing with gradient descent",
                rep.final_grad_norm
            );
            used_fallback = true;
            let (x2, mut rep2) = gradient_descent_fallback(&objective, x, cfg.solver.grad_tol, gd_iters)?;
            let mut trace = rep.objective_trace;
            trace.extend(rep2.objective_trace.drain(1..));
            rep2.objective_trace = trace;
            rep2.iterations += rep.iterations;
            (x2, rep2)
        }
        Err(Error::Config(msg)) => return Err(Error::Config(msg)),
        Err(e) => {
            log::warn!("trust region failed ({e}); continuing with gradient descent");
            used_fallback = true;
            gradient_descent_fallback(&objective, x0, cfg.solver.grad_tol, gd_iters)?
        }
    };
    let target = DiracMixture::new(x.into_matrix(), weights)?;
    Ok(Run {
        target,
        initial,
        report,
        epsilon,
        initial_objective: f0,
        used_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::fibonacci_s2;
    use crate::rng::rng_from_seed;
    use crate::sampling::{sample_vmf, uniform_sphere};

    #[test]
    fn degenerate_source_is_replicated() {
        let p = DMatrix::from_fn(3, 5, |r, _| [0.0, 0.6, 0.8][r]);
        let w = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.2, 0.2]);
        let src = DiracMixture::new(p, w).unwrap();
        let out = hdmr_detailed(&src, &ReapproxConfig::new(1, 0), None).unwrap();
        assert_eq!(out.target.point(0), src.point(0));
        let d3 = hcvmd_source_term(&src, &HcvmdParams::new(3, out.epsilon, 1).unwrap()).unwrap();
        assert!(out.distance_after.abs() <= 1e-10 * d3);
    }

    #[test]
    fn full_size_subsample_is_permutation() {
        let mut rng = rng_from_seed(4);
        let src = DiracMixture::uniform(uniform_sphere(3, 12, &mut rng)).unwrap();
        let x = init_target(&src, &ReapproxConfig::new(12, 9)).unwrap();
        let mut seen = [false; 12];
        for c in x.matrix().column_iter() {
            let j = (0..12).find(|&j| src.point(j) == c).unwrap();
            assert!(!seen[j]);
            seen[j] = true;
        }
    }

    #[test]
    fn farthest_point_pair_is_nearly_antipodal() {
        let src = DiracMixture::uniform(fibonacci_s2(2000)).unwrap();
        let cfg = ReapproxConfig {
            init: InitMethod::FarthestPoint,
            ..ReapproxConfig::new(2, 3)
        };
        let x = init_target(&src, &cfg).unwrap();
        let angle = x.matrix().column(0).dot(&x.matrix().column(1)).clamp(-1.0, 1.0).acos();
        assert!(angle > 3.0, "{angle}");
        assert_eq!(init_target(&src, &cfg).unwrap(), x);
    }

    #[test]
    fn improves_on_initialization() {
        let mu = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let src = sample_vmf(mu.as_view(), 10.0, 300, 5).unwrap();
        let out = hdmr_detailed(&src, &ReapproxConfig::new(8, 1), None).unwrap();
        assert!(out.distance_after <= out.distance_before);
        assert!(out.report.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.target.is_uniform());
        let again = hdmr_detailed(&src, &ReapproxConfig::new(8, 1), None).unwrap();
        assert_eq!(again.target, out.target);
    }

    #[test]
    fn oversized_target_still_runs() {
        let mut rng = rng_from_seed(6);
        let src = DiracMixture::uniform(uniform_sphere(3, 4, &mut rng)).unwrap();
        let (t, _) = hdmr(&src, &ReapproxConfig::new(6, 2)).unwrap();
        assert_eq!(t.len(), 6);
    }

    #[test]
    fn user_provided_needs_points() {
        let mut rng = rng_from_seed(7);
        let src = DiracMixture::uniform(uniform_sphere(3, 10, &mut rng)).unwrap();
        let cfg = ReapproxConfig {
            init: InitMethod::UserProvided,
            ..ReapproxConfig::new(2, 0)
        };
        assert!(matches!(hdmr(&src, &cfg), Err(Error::Config(_))));
        let x0 = ObliquePoint::new(uniform_sphere(3, 2, &mut rng)).unwrap();
        assert!(hdmr_from(&src, &cfg, x0).is_ok());
    }
}
