//! Monte Carlo tracking benchmark on `S²`: a normalized random walk driven by
//! a seven-component vMF mixture, observed through noisy spherical
//! coordinates, tracked by the reapproximation filter and by a bootstrap
//! particle filter on common ground-truth trajectories.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hrdf::{self, FilterState, MeasurementModel, SystemModel};
use crate::mixture::DiracMixture;
use crate::reapprox::{hdmr, ReapproxConfig};
use crate::reconstruct::{LogDensity, ReferenceDensity};
use crate::rng::{derive_seed, derived_rng, Rng};
use crate::rtr::TrustRegionConfig;
use crate::sampling::VmfSampler;

const S5: f64 = 0.447_213_595_499_957_9; // 1/√5

/// Component means of the system-noise mixture.
pub const TRUE_NOISE_MEANS: [[f64; 3]; 7] = [
    [0.0, 0.0, 1.0],
    [0.0, 2.0 * S5, S5],
    [0.0, -2.0 * S5, S5],
    [2.0 * S5, 0.0, S5],
    [-2.0 * S5, 0.0, S5],
    [0.0, S5, 2.0 * S5],
    [0.0, -S5, 2.0 * S5],
];

/// Component concentrations of the system-noise mixture.
pub const TRUE_NOISE_LAMBDAS: [f64; 7] = [5.0, 30.0, 30.0, 30.0, 30.0, 5.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_runs: usize,
    pub num_steps: usize,
    pub meas_noise_var: f64,
    pub n_posterior: usize,
    pub n_w_list: Vec<usize>,
    pub pf_particles_list: Vec<usize>,
    pub seed: u64,
    /// Samples of the true noise that are reapproximated into each noise set.
    pub source_size: usize,
    /// Concentration of the vMF both filters are initialized from.
    pub init_concentration: f64,
    /// Solver for the noise sets and the per-step posteriors.
    pub solver: TrustRegionConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_runs: 200,
            num_steps: 30,
            meas_noise_var: 0.01,
            n_posterior: 5,
            n_w_list: vec![30, 50, 100, 200, 300],
            pf_particles_list: vec![100, 200, 500, 1000, 2000],
            seed: 0,
            source_size: 20_000,
            init_concentration: 5.0,
            solver: TrustRegionConfig::default(),
        }
    }
}

impl SimConfig {
    /// 5000 runs and the full noise-set size list.
    pub fn full_scale() -> Self {
        Self {
            num_runs: 5000,
            n_w_list: vec![30, 50, 100, 200, 300, 500, 1000],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("num_runs", self.num_runs),
            ("num_steps", self.num_steps),
            ("n_posterior", self.n_posterior),
            ("source_size", self.source_size),
        ] {
            if v == 0 {
                errs.push(format!("sim.{name} must be positive"));
            }
        }
        if !(self.meas_noise_var > 0.0) {
            errs.push(format!("sim.meas_noise_var = {} must be positive", self.meas_noise_var));
        }
        if !(self.init_concentration > 0.0) {
            errs.push(format!(
                "sim.init_concentration = {} must be positive",
                self.init_concentration
            ));
        }
        if self.n_w_list.contains(&0) {
            errs.push("sim.n_w_list entries must be positive".into());
        }
        if self.pf_particles_list.contains(&0) {
            errs.push("sim.pf_particles_list entries must be positive".into());
        }
        errs.extend(self.solver.validate().into_iter().map(|e| format!("sim.{e}")));
        errs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: String,
    pub samples: usize,
    pub rmse_final_rad: f64,
    /// Wall-clock milliseconds per filter step; cleared for reproducible output.
    pub mean_runtime_ms_per_step: Option<f64>,
    pub per_run_errors: Vec<f64>,
    /// RMSE over runs at every time step.
    pub per_step_rmse: Vec<f64>,
    /// Filter updates skipped because every likelihood was zero.
    pub degenerate_updates: usize,
    /// Particle-weight collapses that forced a uniform reweighting.
    pub weight_collapses: usize,
}

fn true_noise_density() -> &'static LogDensity {
    static DENSITY: OnceLock<LogDensity> = OnceLock::new();
    DENSITY.get_or_init(|| {
        ReferenceDensity::VmfMixture {
            means: TRUE_NOISE_MEANS.iter().map(|m| m.to_vec()).collect(),
            lambdas: TRUE_NOISE_LAMBDAS.to_vec(),
            weights: None,
        }
        .resolve()
        .expect("valid constant mixture")
    })
}

/// The system-noise mixture as a reference density.
pub fn true_noise_reference() -> ReferenceDensity {
    ReferenceDensity::VmfMixture {
        means: TRUE_NOISE_MEANS.iter().map(|m| m.to_vec()).collect(),
        lambdas: TRUE_NOISE_LAMBDAS.to_vec(),
        weights: None,
    }
}

/// Log-density of the system noise.
pub fn true_noise_logpdf(w: DVectorView<'_, f64>) -> f64 {
    true_noise_density().logpdf(w)
}

/// Exact sampler for the system noise.
pub struct TrueNoiseSampler {
    components: Vec<VmfSampler>,
}

impl TrueNoiseSampler {
    pub fn new() -> Self {
        let components = TRUE_NOISE_MEANS
            .iter()
            .zip(TRUE_NOISE_LAMBDAS)
            .map(|(m, l)| VmfSampler::new(DVector::from_column_slice(m).as_view(), l).expect("valid component"))
            .collect();
        Self { components }
    }

    pub fn sample(&self, rng: &mut Rng) -> DVector<f64> {
        let k = rng.random_range(0..self.components.len());
        let mut out = DVector::zeros(3);
        self.components[k].sample_into(rng, out.as_mut_slice());
        out
    }

    pub fn sample_mixture(&self, count: usize, rng: &mut Rng) -> Result<DiracMixture> {
        let mut m = DMatrix::zeros(3, count);
        for j in 0..count {
            m.set_column(j, &self.sample(rng));
        }
        DiracMixture::uniform(m)
    }
}

impl Default for TrueNoiseSampler {
    fn default() -> Self {
        Self::new()
    }
}

/// `normalize(x + w)`.
pub fn propagate(x: DVectorView<'_, f64>, w: DVectorView<'_, f64>) -> Result<DVector<f64>> {
    let s = x + w;
    let norm = s.norm();
    if !(norm > 1e-12) {
        return Err(Error::AntipodalSum);
    }
    Ok(s / norm)
}

/// Azimuth and elevation of `x`; the flag is set at the poles, where the
/// azimuth is reported as 0.
pub fn spherical_coords(x: DVectorView<'_, f64>) -> ([f64; 2], bool) {
    let rho = x[0].hypot(x[1]);
    let elevation = x[2].atan2(rho);
    if x[0].abs() + x[1].abs() <= 1e-12 {
        return ([0.0, elevation], true);
    }
    ([x[1].atan2(x[0]), elevation], false)
}

/// Noisy spherical-coordinate measurement.
pub fn measure(x: DVectorView<'_, f64>, noise: [f64; 2]) -> [f64; 2] {
    let ([az, el], at_pole) = spherical_coords(x);
    if at_pole {
        log::debug!("measurement taken at a pole; azimuth set to 0");
    }
    [az + noise[0], el + noise[1]]
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Isotropic Gaussian log-likelihood of `z` given state `x`, with the
/// azimuth residual wrapped.
pub fn meas_loglik(z: &[f64; 2], x: DVectorView<'_, f64>, var: f64) -> f64 {
    let (h, _) = spherical_coords(x);
    let r0 = wrap_angle(z[0] - h[0]);
    let r1 = z[1] - h[1];
    -(2.0 * PI * var).ln() - (r0 * r0 + r1 * r1) / (2.0 * var)
}

/// Arc length between two unit vectors.
pub fn arc_error(a: DVectorView<'_, f64>, b: DVectorView<'_, f64>) -> f64 {
    a.dot(&b).clamp(-1.0, 1.0).acos()
}

/// Ground truth and measurements of one run; `truth[0]` is the initial state,
/// `measurements[t-1]` observes `truth[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub truth: Vec<DVector<f64>>,
    pub measurements: Vec<[f64; 2]>,
}

/// Trajectory of run `run`, shared by every method.
pub fn trajectory(cfg: &SimConfig, run: usize, noise: &TrueNoiseSampler) -> Result<Trajectory> {
    let mut rng = derived_rng(cfg.seed, &format!("harness/truth/{run}"));
    let meas = Normal::new(0.0, cfg.meas_noise_var.sqrt()).map_err(|e| Error::Config(e.to_string()))?;
    let e3 = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let mut truth = vec![propagate(e3.as_view(), noise.sample(&mut rng).as_view())?];
    let mut measurements = Vec::with_capacity(cfg.num_steps);
    for _ in 0..cfg.num_steps {
        let prev = truth.last().expect("nonempty");
        let next = propagate(prev.as_view(), noise.sample(&mut rng).as_view())?;
        measurements.push(measure(next.as_view(), [meas.sample(&mut rng), meas.sample(&mut rng)]));
        truth.push(next);
    }
    Ok(Trajectory { truth, measurements })
}

fn estimate_or_heaviest(mix: &DiracMixture) -> DVector<f64> {
    let r = mix.resultant();
    let norm = r.norm();
    if norm > 1e-9 {
        r / norm
    } else {
        mix.point(mix.weights().imax()).into_owned()
    }
}

/// One filter run over one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    /// Point estimate at every step.
    pub estimates: Vec<DVector<f64>>,
    /// Arc error of the estimate at every step.
    pub errors: Vec<f64>,
    pub seconds: f64,
    pub degenerate: usize,
    pub collapses: usize,
}

/// Wall clock where one exists; browsers running wasm32 have none.
struct Stopwatch(Option<Instant>);

impl Stopwatch {
    fn start() -> Self {
        Self((!cfg!(target_arch = "wasm32")).then(Instant::now))
    }

    fn seconds(&self) -> f64 {
        self.0.map_or(0.0, |t| t.elapsed().as_secs_f64())
    }
}

fn summarize(method: &str, samples: usize, cfg: &SimConfig, outcomes: Vec<Track>) -> RunResult {
    let runs = outcomes.len() as f64;
    let per_run_errors: Vec<f64> = outcomes
        .iter()
        .map(|o| *o.errors.last().expect("num_steps >= 1"))
        .collect();
    let rmse = (per_run_errors.iter().map(|e| e * e).sum::<f64>() / runs).sqrt();
    let per_step_rmse = (0..cfg.num_steps)
        .map(|t| (outcomes.iter().map(|o| o.errors[t] * o.errors[t]).sum::<f64>() / runs).sqrt())
        .collect();
    let total_secs: f64 = outcomes.iter().map(|o| o.seconds).sum();
    RunResult {
        method: method.to_string(),
        samples,
        rmse_final_rad: rmse,
        mean_runtime_ms_per_step: Some(1e3 * total_secs / (runs * cfg.num_steps as f64)),
        per_run_errors,
        per_step_rmse,
        degenerate_updates: outcomes.iter().map(|o| o.degenerate).sum(),
        weight_collapses: outcomes.iter().map(|o| o.collapses).sum(),
    }
}

#[cfg(feature = "parallel")]
fn map_runs<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_runs<T>(n: usize, f: impl Fn(usize) -> Result<T>) -> Result<Vec<T>> {
    (0..n).map(f).collect()
}

/// Samples of the true noise that noise sets are reapproximated from.
pub fn noise_source(cfg: &SimConfig) -> Result<DiracMixture> {
    let mut rng = derived_rng(cfg.seed, "harness/noise-source");
    TrueNoiseSampler::new().sample_mixture(cfg.source_size, &mut rng)
}

/// Offline reapproximation of the noise source to `n_w` points.
pub fn noise_set(cfg: &SimConfig, source: &DiracMixture, n_w: usize) -> Result<DiracMixture> {
    let rc = ReapproxConfig {
        n_target: n_w,
        seed: derive_seed(cfg.seed, "harness/noise-set"),
        solver: cfg.solver.clone(),
        ..ReapproxConfig::default()
    };
    Ok(hdmr(source, &rc)?.0)
}

/// Reapproximation filter over one trajectory; `run` selects the seeds.
pub fn track_hrdf(cfg: &SimConfig, noise: &DiracMixture, traj: &Trajectory, run: usize) -> Result<Track> {
    let mut rng = derived_rng(cfg.seed, &format!("harness/hrdf/{run}"));
    let init = VmfSampler::new(traj.truth[0].as_view(), cfg.init_concentration)?;
    let mut state = FilterState::new(DiracMixture::uniform(init.sample_matrix(cfg.n_posterior, &mut rng))?);
    let sys = SystemModel {
        transition: propagate,
        noise: noise.clone(),
    };
    let var = cfg.meas_noise_var;
    let meas = MeasurementModel {
        log_likelihood: |z: &[f64; 2], x: DVectorView<f64>| meas_loglik(z, x, var),
    };
    let flat = MeasurementModel {
        log_likelihood: |_: &[f64; 2], _: DVectorView<f64>| 0.0,
    };
    let rc = ReapproxConfig {
        n_target: cfg.n_posterior,
        seed: derive_seed(cfg.seed, &format!("harness/hrdf-solver/{run}")),
        solver: cfg.solver.clone(),
        ..ReapproxConfig::default()
    };

    let mut errors = Vec::with_capacity(cfg.num_steps);
    let mut degenerate = 0;
    let start = Stopwatch::start();
    let mut estimates = Vec::with_capacity(cfg.num_steps);
    for (t, z) in traj.measurements.iter().enumerate() {
        state = match hrdf::step(&state, &sys, &meas, z, &rc) {
            Ok(s) => s,
            Err(Error::DegenerateUpdate) => {
                degenerate += 1;
                hrdf::step(&state, &sys, &flat, z, &rc)?
            }
            Err(e) => return Err(e),
        };
        let est = estimate_or_heaviest(&state.posterior);
        errors.push(arc_error(traj.truth[t + 1].as_view(), est.as_view()));
        estimates.push(est);
    }
    Ok(Track {
        estimates,
        errors,
        seconds: start.seconds(),
        degenerate,
        collapses: 0,
    })
}

/// Reapproximation filter with `n_posterior` points and a noise set of
/// `noise.len()` points over all runs.
pub fn run_hrdf_with_noise(cfg: &SimConfig, noise: &DiracMixture) -> Result<RunResult> {
    let sampler = TrueNoiseSampler::new();
    let outcomes = map_runs(cfg.num_runs, |run| {
        let traj = trajectory(cfg, run, &sampler)?;
        track_hrdf(cfg, noise, &traj, run)
    })?;
    Ok(summarize("hrdf", noise.len(), cfg, outcomes))
}

/// [`run_hrdf_with_noise`] with the noise set computed from `cfg` and `seed`.
pub fn run_hrdf(cfg: &SimConfig, n_w: usize, seed: u64) -> Result<RunResult> {
    let cfg = SimConfig { seed, ..cfg.clone() };
    let noise = noise_set(&cfg, &noise_source(&cfg)?, n_w)?;
    run_hrdf_with_noise(&cfg, &noise)
}

fn systematic_resample(points: &DMatrix<f64>, weights: &[f64], rng: &mut Rng) -> DMatrix<f64> {
    let n = weights.len();
    let step = 1.0 / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = DMatrix::zeros(points.nrows(), n);
    let mut cum = weights[0];
    let mut k = 0;
    for j in 0..n {
        while u > cum && k + 1 < n {
            k += 1;
            cum += weights[k];
        }
        out.set_column(j, &points.column(k));
        u += step;
    }
    out
}

/// Bootstrap particle filter over one trajectory; `run` selects the seeds.
pub fn track_pf(
    cfg: &SimConfig,
    particles: usize,
    traj: &Trajectory,
    run: usize,
    sampler: &TrueNoiseSampler,
) -> Result<Track> {
    let mut rng = derived_rng(cfg.seed, &format!("harness/pf/{run}"));
    let init = VmfSampler::new(traj.truth[0].as_view(), cfg.init_concentration)?;
    let mut pts = init.sample_matrix(particles, &mut rng);
    let mut logw = vec![0.0; particles];
    let mut w = vec![0.0; particles];
    let mut errors = Vec::with_capacity(cfg.num_steps);
    let mut collapses = 0;
    let start = Stopwatch::start();
    let mut estimates = Vec::with_capacity(cfg.num_steps);
    for (t, z) in traj.measurements.iter().enumerate() {
        for (j, lw) in logw.iter_mut().enumerate() {
            let next = propagate(pts.column(j), sampler.sample(&mut rng).as_view())?;
            *lw = meas_loglik(z, next.as_view(), cfg.meas_noise_var);
            pts.set_column(j, &next);
        }
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max.is_finite() {
            let mut total = 0.0;
            for j in 0..particles {
                w[j] = (logw[j] - max).exp();
                total += w[j];
            }
            w.iter_mut().for_each(|x| *x /= total);
        } else {
            collapses += 1;
            log::warn!("particle weights collapsed at step {}; reweighting uniformly", t + 1);
            w.iter_mut().for_each(|x| *x = 1.0 / particles as f64);
        }
        let est = estimate_or_heaviest(&DiracMixture::new(pts.clone(), DVector::from_column_slice(&w))?);
        errors.push(arc_error(traj.truth[t + 1].as_view(), est.as_view()));
        estimates.push(est);
        pts = systematic_resample(&pts, &w, &mut rng);
    }
    Ok(Track {
        estimates,
        errors,
        seconds: start.seconds(),
        degenerate: 0,
        collapses,
    })
}

/// Bootstrap particle filter with the exact noise density as proposal.
pub fn run_particle_filter(cfg: &SimConfig, num_particles: usize, seed: u64) -> Result<RunResult> {
    let cfg = SimConfig { seed, ..cfg.clone() };
    let sampler = TrueNoiseSampler::new();
    let outcomes = map_runs(cfg.num_runs, |run| {
        let traj = trajectory(&cfg, run, &sampler)?;
        track_pf(&cfg, num_particles, &traj, run, &sampler)
    })?;
    Ok(summarize("pf", num_particles, &cfg, outcomes))
}

/// All rows of a benchmark plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub config: SimConfig,
    pub rows: Vec<RunResult>,
}

/// HRDF over `n_w_list` and the particle filter over `pf_particles_list`,
/// all on the same trajectories.
pub fn benchmark(cfg: &SimConfig) -> Result<Benchmark> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs.join("; ")));
    }
    let mut rows = Vec::new();
    if !cfg.n_w_list.is_empty() {
        let source = noise_source(cfg)?;
        for &n_w in &cfg.n_w_list {
            log::info!("reapproximating the system noise to {n_w} points");
            let noise = noise_set(cfg, &source, n_w)?;
            log::info!("running the reapproximation filter with {n_w} noise points");
            rows.push(run_hrdf_with_noise(cfg, &noise)?);
        }
    }
    for &p in &cfg.pf_particles_list {
        log::info!("running the particle filter with {p} particles");
        rows.push(run_particle_filter(cfg, p, cfg.seed)?);
    }
    Ok(Benchmark {
        config: cfg.clone(),
        rows,
    })
}

impl Benchmark {
    /// Drops the wall-clock runtimes, leaving only seed-determined values.
    pub fn without_runtime(mut self) -> Self {
        for r in &mut self.rows {
            r.mean_runtime_ms_per_step = None;
        }
        self
    }

    /// Results table; the runtime column is blank for cleared runtimes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,samples,rmse_rad,runtime_ms_per_step,runs,steps,seed\n");
        for r in &self.rows {
            let runtime = r.mean_runtime_ms_per_step.map(|t| t.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.method,
                r.samples,
                r.rmse_final_rad,
                runtime,
                self.config.num_runs,
                self.config.num_steps,
                self.config.seed
            ));
        }
        out
    }

    pub fn row(&self, method: &str, samples: usize) -> Option<&RunResult> {
        self.rows.iter().find(|r| r.method == method && r.samples == samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::fibonacci_s2;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn noise_constants() {
        for m in TRUE_NOISE_MEANS {
            assert!((v(&m).norm() - 1.0).abs() < 1e-15);
        }
        let nodes = fibonacci_s2(20_000);
        let total: f64 = nodes.column_iter().map(|x| true_noise_logpdf(x).exp()).sum::<f64>() * 4.0 * PI / 20_000.0;
        assert!((total - 1.0).abs() < 1e-3, "{total}");
        assert!(true_noise_logpdf(v(&[0.0, 0.0, 1.0]).as_view()) > true_noise_logpdf(v(&[0.0, 0.0, -1.0]).as_view()));
    }

    #[test]
    fn propagate_examples() {
        let e1 = v(&[1.0, 0.0, 0.0]);
        let e2 = v(&[0.0, 1.0, 0.0]);
        assert_eq!(propagate(e1.as_view(), e1.as_view()).unwrap(), e1);
        let h = 0.5f64.sqrt();
        assert!((propagate(e1.as_view(), e2.as_view()).unwrap() - v(&[h, h, 0.0])).norm() < 1e-15);
        assert!(matches!(
            propagate(e1.as_view(), (-&e1).as_view()),
            Err(Error::AntipodalSum)
        ));
    }

    #[test]
    fn measurement_examples() {
        assert_eq!(measure(v(&[1.0, 0.0, 0.0]).as_view(), [0.0, 0.0]), [0.0, 0.0]);
        let z = measure(v(&[0.0, 1.0, 0.0]).as_view(), [0.0, 0.0]);
        assert!((z[0] - PI / 2.0).abs() < 1e-15 && z[1] == 0.0);
        let h = 0.5f64.sqrt();
        let z = measure(v(&[h, 0.0, h]).as_view(), [0.0, 0.0]);
        assert!(z[0] == 0.0 && (z[1] - PI / 4.0).abs() < 1e-15);
        let (_, pole) = spherical_coords(v(&[0.0, 0.0, 1.0]).as_view());
        assert!(pole);
    }

    #[test]
    fn likelihood_examples() {
        let x = v(&[0.6, 0.0, 0.8]);
        let h = spherical_coords(x.as_view()).0;
        let var = 0.01;
        assert!((meas_loglik(&h, x.as_view(), var) + (2.0 * PI * var).ln()).abs() < 1e-14);
        let shifted = [h[0] + 2.0 * PI - 0.1, h[1]];
        let direct = [h[0] - 0.1, h[1]];
        assert!((meas_loglik(&shifted, x.as_view(), var) - meas_loglik(&direct, x.as_view(), var)).abs() < 1e-9);
        assert!((wrap_angle(2.0 * PI - 0.1) + 0.1).abs() < 1e-15);
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
    }

    #[test]
    fn error_metric_bounds() {
        let a = v(&[0.0, 0.6, 0.8]);
        assert_eq!(arc_error(a.as_view(), a.as_view()), 0.0);
        assert!((arc_error(a.as_view(), (-&a).as_view()) - PI).abs() < 1e-7);
    }

    #[test]
    fn trajectories_are_shared_and_unit() {
        let cfg = SimConfig {
            num_steps: 10,
            ..SimConfig::default()
        };
        let s = TrueNoiseSampler::new();
        let a = trajectory(&cfg, 3, &s).unwrap();
        assert_eq!(a, trajectory(&cfg, 3, &s).unwrap());
        assert_ne!(a, trajectory(&cfg, 4, &s).unwrap());
        assert!(a.truth.iter().all(|x| (x.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn systematic_resampling_follows_weights() {
        let pts = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let mut rng = derived_rng(1, "t");
        let out = systematic_resample(&pts, &[0.0, 1.0], &mut rng);
        assert!(out.column_iter().all(|c| c[1] == 1.0));
    }
}
