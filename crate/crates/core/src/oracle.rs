//! Reference-value suites: closed forms against quadrature, analytic
//! derivatives against finite differences, metric identities, and the
//! single-component likelihood reduction. Each suite reports its inputs,
//! values and tolerance so the output can be stored as a test fixture.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::hcvmd::{hcvmd_distance, hcvmd_unit, hcvmd_unit_numeric_delta, HcvmdObjective, HcvmdParams};
use crate::mixture::DiracMixture;
use crate::reconstruct::fit_lambda;
use crate::rng::derived_rng;
use crate::sampling::{random_rotation, sample_vmf, uniform_sphere};
use crate::specfn::inv_bessel_ratio;

pub const SUITES: [&str; 4] = ["hcvmd-unit", "derivatives", "metric", "mle"];

pub const UNIT_DELTAS: [f64; 6] = [-1.0, -0.5, 0.0, 0.5, 0.99, 1.0];
pub const UNIT_EPSILONS: [f64; 3] = [2.05, 2.1, 3.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub suite: String,
    /// Named tolerances each row is checked against.
    pub tolerances: serde_json::Value,
    pub passed: bool,
    pub rows: Vec<serde_json::Value>,
}

pub fn run_suite(name: &str) -> Result<OracleReport> {
    match name {
        "hcvmd-unit" => unit_suite(),
        "derivatives" => derivative_suite(),
        "metric" => metric_suite(),
        "mle" => mle_suite(),
        _ => Err(Error::Config(format!(
            "unknown oracle suite `{name}`; available: {}",
            SUITES.join(", ")
        ))),
    }
}

fn unit_suite() -> Result<OracleReport> {
    let tol = 1e-6;
    let mut rows = Vec::new();
    let mut passed = true;
    for &eps in &UNIT_EPSILONS {
        let params = HcvmdParams::new(3, eps, 1)?;
        for &delta in &UNIT_DELTAS {
            let closed = hcvmd_unit(delta, &params)?;
            let numeric = hcvmd_unit_numeric_delta(delta, eps)?;
            let rel = (closed / numeric - 1.0).abs();
            passed &= rel <= tol;
            rows.push(json!({"delta": delta, "d": 3, "epsilon": eps, "q_closed": closed, "q_numeric": numeric, "rel_err": rel}));
        }
    }
    Ok(OracleReport {
        suite: "hcvmd-unit".into(),
        tolerances: json!({"rel_err": tol}),
        passed,
        rows,
    })
}

/// Shape of derivative instance `k`: `(d, n, n_o)`.
pub fn derivative_instance(k: usize) -> (usize, usize, usize) {
    (3 + k % 2, 3 + k % 6, 20 + 2 * k)
}

fn weighted_random(d: usize, m: usize, rng: &mut crate::rng::Rng) -> Result<DiracMixture> {
    use rand::Rng as _;
    let pts = uniform_sphere(d, m, rng);
    let w = DVector::from_fn(m, |_, _| rng.random_range(0.1..1.0));
    DiracMixture::from_unnormalized(pts, w)
}

/// Deviations `(gradient, hessian, symmetry)` of one seeded instance.
pub fn derivative_deviations(k: usize) -> Result<(f64, f64, f64)> {
    let (d, n, m) = derivative_instance(k);
    let mut rng = derived_rng(k as u64, "oracle/derivatives");
    let source = weighted_random(d, m, &mut rng)?;
    let params = HcvmdParams::for_target(d, n)?;
    let obj = HcvmdObjective::uniform(source, n, params)?;
    let x = uniform_sphere(d, n, &mut rng);
    let (_, g, cache) = obj.evaluate(&x)?;

    let h = 1e-5;
    let mut fd = DMatrix::zeros(d, n);
    for idx in 0..d * n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[idx] += h;
        xm[idx] -= h;
        fd[idx] = (obj.value(&xp)? - obj.value(&xm)?) / (2.0 * h);
    }
    let grad_dev = (&fd - &g).norm() / g.norm();

    let u = uniform_sphere(d, n, &mut rng);
    let v = uniform_sphere(d, n, &mut rng);
    let hu = obj.hess_action(&x, &cache, &u);
    let hv = obj.hess_action(&x, &cache, &v);
    let fd_h = (obj.gradient(&(&x + &u * h))? - obj.gradient(&(&x - &u * h))?) / (2.0 * h);
    let hess_dev = (&fd_h - &hu).norm() / hu.norm();
    let (a, b) = (v.dot(&hu), u.dot(&hv));
    let sym_dev = (a - b).abs() / a.abs().max(b.abs());
    Ok((grad_dev, hess_dev, sym_dev))
}

fn derivative_suite() -> Result<OracleReport> {
    let (gt, ht, st) = (1e-5, 1e-4, 1e-8);
    let mut rows = Vec::new();
    let mut passed = true;
    for k in 0..20 {
        let (d, n, m) = derivative_instance(k);
        let (g, h, s) = derivative_deviations(k)?;
        passed &= g <= gt && h <= ht && s <= st;
        rows.push(
            json!({"instance": k, "d": d, "n": n, "n_o": m, "grad_rel_dev": g, "hess_rel_dev": h, "sym_rel_dev": s}),
        );
    }
    Ok(OracleReport {
        suite: "derivatives".into(),
        tolerances: json!({"grad_rel_dev": gt, "hess_rel_dev": ht, "sym_rel_dev": st}),
        passed,
        rows,
    })
}

/// Metric checks on instance `k`: `(D/D3, D(X,X)/D3, rotation deviation)`.
pub fn metric_deviations(k: usize) -> Result<(f64, f64, f64)> {
    let mut rng = derived_rng(k as u64, "oracle/metric");
    let d = 3 + k % 3;
    let n = 2 + k % 9;
    let target = DiracMixture::uniform(uniform_sphere(d, n, &mut rng))?;
    let source = weighted_random(d, 10 + k % 40, &mut rng)?;
    let params = HcvmdParams::for_target(d, n)?;
    let v = hcvmd_distance(&target, &source, &params, None)?;
    let same = hcvmd_distance(&source, &source, &params, None)?;
    let rot = random_rotation(d, &mut rng);
    let vr = hcvmd_distance(&target.transformed(&rot)?, &source.transformed(&rot)?, &params, None)?;
    Ok((
        v.total / v.d3,
        same.total.abs() / same.d3,
        (vr.total - v.total).abs() / v.total.abs(),
    ))
}

fn metric_suite() -> Result<OracleReport> {
    let (nonneg, self_tol, rot_tol) = (-1e-9, 1e-10, 1e-10);
    let mut rows = Vec::new();
    let mut passed = true;
    for k in 0..100 {
        let (ratio, selfd, rot) = metric_deviations(k)?;
        passed &= ratio >= nonneg && selfd <= self_tol && rot <= rot_tol;
        rows.push(json!({"instance": k, "d_over_d3": ratio, "self_over_d3": selfd, "rotation_rel_dev": rot}));
    }
    Ok(OracleReport {
        suite: "metric".into(),
        tolerances: json!({"d_over_d3_min": nonneg, "self_over_d3": self_tol, "rotation_rel_dev": rot_tol}),
        passed,
        rows,
    })
}

/// Single-component fit against the closed form: `(λ̂, A_d⁻¹(‖r‖))`.
pub fn single_component_mle(d: usize, lambda: f64, seed: u64) -> Result<(f64, f64)> {
    let mut mu = DVector::zeros(d);
    mu[d - 1] = 1.0;
    let source = sample_vmf(mu.as_view(), lambda, 2000, seed)?;
    let r = source.resultant();
    let norm = r.norm();
    let target = DiracMixture::uniform(DMatrix::from_column_slice(d, 1, (r / norm).as_slice()))?;
    let (fit, _) = fit_lambda(&target, &source, 1e-12, 100)?;
    Ok((fit, inv_bessel_ratio(d, norm)?))
}

fn mle_suite() -> Result<OracleReport> {
    let tol = 1e-8;
    let mut rows = Vec::new();
    let mut passed = true;
    for (i, &(d, lambda)) in [(3, 1.0), (3, 10.0), (3, 50.0), (4, 5.0), (5, 20.0)].iter().enumerate() {
        let (fit, closed) = single_component_mle(d, lambda, i as u64)?;
        let rel = (fit / closed - 1.0).abs();
        passed &= rel <= tol;
        rows.push(json!({"d": d, "lambda_true": lambda, "lambda_fit": fit, "lambda_closed": closed, "rel_err": rel}));
    }
    Ok(OracleReport {
        suite: "mle".into(),
        tolerances: json!({"rel_err": tol}),
        passed,
        rows,
    })
}
