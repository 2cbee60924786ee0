//! WebAssembly bindings for the static demo page in `www/`. Each export
//! returns a JSON string; the plain-Rust `*_json` functions behind them are
//! what the native tests exercise.

use hdmr::harness::{self, SimConfig, TrueNoiseSampler};
use hdmr::reapprox::{hdmr_detailed, ReapproxConfig};
use hdmr::reconstruct::{hellinger_s2, reconstruct};
use hdmr::rng::derived_rng;
use hdmr::sampling::sample_vmf;
use hdmr::DiracMixture;
use nalgebra::{DVector, DVectorView};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Points = Vec<[f64; 3]>;

fn points(mix: &DiracMixture) -> Points {
    (0..mix.len()).map(|j| xyz(mix.point(j))).collect()
}

fn xyz(v: DVectorView<'_, f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ReapproxView {
    source: Points,
    target: Points,
    distance_before: f64,
    distance_after: f64,
    iterations: usize,
}

/// vMF samples around the north pole compressed to `n` points.
pub fn reapprox_json(lambda: f64, source_size: usize, n: usize, seed: u64) -> Result<String, String> {
    let mu = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let source = sample_vmf(mu.as_view(), lambda, source_size, seed).map_err(|e| e.to_string())?;
    let out = hdmr_detailed(&source, &ReapproxConfig::new(n, seed), None).map_err(|e| e.to_string())?;
    to_json(&ReapproxView {
        source: points(&source),
        target: points(&out.target),
        distance_before: out.distance_before,
        distance_after: out.distance_after,
        iterations: out.report.iterations,
    })
}

#[derive(Serialize)]
struct ReconstructView {
    source: Points,
    means: Points,
    lambda: f64,
    hellinger: f64,
}

/// Samples of the seven-component noise mixture, reconstructed with `n`
/// means and scored against the true density.
pub fn reconstruct_json(n: usize, source_size: usize, seed: u64) -> Result<String, String> {
    let mut rng = derived_rng(seed, "web/reconstruct");
    let source = TrueNoiseSampler::new()
        .sample_mixture(source_size, &mut rng)
        .map_err(|e| e.to_string())?;
    let rec = reconstruct(&source, &ReapproxConfig::new(n, seed)).map_err(|e| e.to_string())?;
    let hellinger = hellinger_s2(|x| rec.mixture.logpdf(x), harness::true_noise_logpdf, 20_000);
    to_json(&ReconstructView {
        source: points(&source),
        means: rec.mixture.means().column_iter().map(|c| [c[0], c[1], c[2]]).collect(),
        lambda: rec.mixture.lambda(),
        hellinger,
    })
}

#[derive(Serialize)]
struct TrackView {
    truth: Points,
    hrdf: Points,
    pf: Points,
    hrdf_errors: Vec<f64>,
    pf_errors: Vec<f64>,
}

/// One tracking run of both filters on a shared trajectory.
pub fn track_json(steps: usize, n_w: usize, particles: usize, seed: u64) -> Result<String, String> {
    let cfg = SimConfig {
        num_steps: steps,
        source_size: 2000,
        seed,
        ..SimConfig::default()
    };
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(errs.join("; "));
    }
    let run = || -> hdmr::Result<TrackView> {
        let noise = harness::noise_set(&cfg, &harness::noise_source(&cfg)?, n_w)?;
        let sampler = TrueNoiseSampler::new();
        let traj = harness::trajectory(&cfg, 0, &sampler)?;
        let h = harness::track_hrdf(&cfg, &noise, &traj, 0)?;
        let p = harness::track_pf(&cfg, particles, &traj, 0, &sampler)?;
        Ok(TrackView {
            truth: traj.truth.iter().map(|x| xyz(x.as_view())).collect(),
            hrdf: h.estimates.iter().map(|x| xyz(x.as_view())).collect(),
            pf: p.estimates.iter().map(|x| xyz(x.as_view())).collect(),
            hrdf_errors: h.errors,
            pf_errors: p.errors,
        })
    };
    to_json(&run().map_err(|e| e.to_string())?)
}

#[wasm_bindgen]
pub fn reapprox(lambda: f64, source_size: u32, n: u32, seed: u32) -> Result<String, JsError> {
    reapprox_json(lambda, source_size as usize, n as usize, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn reconstruct_noise(n: u32, source_size: u32, seed: u32) -> Result<String, JsError> {
    reconstruct_json(n as usize, source_size as usize, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn track(steps: u32, n_w: u32, particles: u32, seed: u32) -> Result<String, JsError> {
    track_json(steps as usize, n_w as usize, particles as usize, seed.into()).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn reapprox_view_shapes() {
        let v: Value = serde_json::from_str(&reapprox_json(10.0, 300, 12, 1).unwrap()).unwrap();
        assert_eq!(v["source"].as_array().unwrap().len(), 300);
        assert_eq!(v["target"].as_array().unwrap().len(), 12);
        assert!(v["distance_after"].as_f64().unwrap() < v["distance_before"].as_f64().unwrap());
    }

    #[test]
    fn reconstruct_view_has_score() {
        let v: Value = serde_json::from_str(&reconstruct_json(8, 500, 2).unwrap()).unwrap();
        assert_eq!(v["means"].as_array().unwrap().len(), 8);
        let h = v["hellinger"].as_f64().unwrap();
        assert!(h > 0.0 && h < 1.0);
    }

    #[test]
    fn track_view_lengths() {
        let v: Value = serde_json::from_str(&track_json(5, 20, 100, 3).unwrap()).unwrap();
        assert_eq!(v["truth"].as_array().unwrap().len(), 6);
        assert_eq!(v["hrdf"].as_array().unwrap().len(), 5);
        assert_eq!(v["pf_errors"].as_array().unwrap().len(), 5);
        assert!(track_json(0, 20, 100, 3).is_err());
    }
}
