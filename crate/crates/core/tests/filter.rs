use hdmr::harness::{self, SimConfig, Trajectory, TrueNoiseSampler};
use hdmr::hcvmd::{hcvmd_distance, HcvmdParams};
use hdmr::hrdf::{self, FilterState, MeasurementModel, SystemModel};
use hdmr::reapprox::{init_target, ReapproxConfig};
use hdmr::rng::derive_seed;
use hdmr::sampling::sample_vmf;
use hdmr::{DiracMixture, Error, Result};
use nalgebra::{DMatrix, DVector, DVectorView};

fn e3() -> DVector<f64> {
    DVector::from_vec(vec![0.0, 0.0, 1.0])
}

fn identity(x: DVectorView<'_, f64>, _: DVectorView<'_, f64>) -> Result<DVector<f64>> {
    Ok(x.into_owned())
}

#[test]
fn identity_transition_keeps_locations() {
    let post = sample_vmf(e3().as_view(), 4.0, 4, 1).unwrap();
    let noise = sample_vmf(e3().as_view(), 4.0, 7, 2).unwrap();
    let sys = SystemModel {
        transition: identity,
        noise,
    };
    let p = hrdf::predict(&FilterState::new(post.clone()), &sys).unwrap();
    assert_eq!(p.len(), 28);
    assert!((p.weights().sum() - 1.0).abs() < 1e-12);
    for r in 0..28 {
        assert_eq!(p.point(r), post.point(r / 7));
    }

    let x = sample_vmf(e3().as_view(), 4.0, 1, 3).unwrap();
    let w = sample_vmf(e3().as_view(), 4.0, 1, 4).unwrap();
    let sys = SystemModel {
        transition: harness::propagate,
        noise: w.clone(),
    };
    let p = hrdf::predict(&FilterState::new(x.clone()), &sys).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p.point(0), harness::propagate(x.point(0), w.point(0)).unwrap());
}

#[test]
fn one_hot_measurement_concentrates_posterior() {
    let state = FilterState::new(sample_vmf(DVector::from_vec(vec![1.0, 0.0, 0.0]).as_view(), 3.0, 5, 9).unwrap());
    let noise = DiracMixture::uniform(DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0])).unwrap();
    let sys = SystemModel {
        transition: harness::propagate,
        noise,
    };
    let target = harness::propagate(state.posterior.point(2), e3().as_view()).unwrap();
    let meas = MeasurementModel {
        log_likelihood: |z: &DVector<f64>, x: DVectorView<f64>| {
            if (x - z).norm() < 1e-12 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        },
    };
    let next = hrdf::step(&state, &sys, &meas, &target, &ReapproxConfig::new(5, 3)).unwrap();
    assert_eq!(next.t, 1);
    for j in 0..5 {
        let angle = harness::arc_error(next.posterior.point(j), target.as_view());
        assert!(angle < 0.2, "component {j} is {angle} rad away");
    }
}

#[test]
fn flat_likelihood_step_improves_on_its_start() {
    let state = FilterState::new(sample_vmf(e3().as_view(), 5.0, 40, 4).unwrap());
    let sys = SystemModel {
        transition: identity,
        noise: DiracMixture::uniform(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap(),
    };
    let flat = MeasurementModel {
        log_likelihood: |_: &(), _: DVectorView<f64>| 0.0,
    };
    let cfg = ReapproxConfig::new(8, 11);
    let next = hrdf::step(&state, &sys, &flat, &(), &cfg).unwrap();

    let params = HcvmdParams::for_target(3, 8).unwrap();
    let start_cfg = ReapproxConfig {
        seed: derive_seed(cfg.seed, "hrdf/step/1"),
        ..cfg
    };
    let start = DiracMixture::uniform(init_target(&state.posterior, &start_cfg).unwrap().into_matrix()).unwrap();
    let before = hcvmd_distance(&start, &state.posterior, &params, None).unwrap().total;
    let after = hcvmd_distance(&next.posterior, &state.posterior, &params, None)
        .unwrap()
        .total;
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn seeded_step_is_bit_identical() {
    let cfg = SimConfig::default();
    let noise = sample_vmf(e3().as_view(), 10.0, 30, 5).unwrap();
    let sys = SystemModel {
        transition: harness::propagate,
        noise,
    };
    let meas = MeasurementModel {
        log_likelihood: |z: &[f64; 2], x: DVectorView<f64>| harness::meas_loglik(z, x, cfg.meas_noise_var),
    };
    let state = FilterState::new(sample_vmf(e3().as_view(), 5.0, 5, 6).unwrap());
    let z = [0.3, 1.2];
    let rc = ReapproxConfig {
        solver: cfg.solver.clone(),
        ..ReapproxConfig::new(5, 8)
    };
    let a = hrdf::step(&state, &sys, &meas, &z, &rc).unwrap();
    let b = hrdf::step(&state, &sys, &meas, &z, &rc).unwrap();
    assert_eq!(a, b);
}

#[test]
fn impossible_measurement_is_reported() {
    let state = FilterState::new(sample_vmf(e3().as_view(), 5.0, 5, 6).unwrap());
    let sys = SystemModel {
        transition: identity,
        noise: state.posterior.clone(),
    };
    let none = MeasurementModel {
        log_likelihood: |_: &(), _: DVectorView<f64>| f64::NEG_INFINITY,
    };
    let err = hrdf::step(&state, &sys, &none, &(), &ReapproxConfig::new(5, 1)).unwrap_err();
    assert!(matches!(err, Error::DegenerateUpdate));
}

/// Truth pushed by a fixed noise vector and observed without noise.
fn deterministic_trajectory(start: DVector<f64>, w: &DVector<f64>, steps: usize) -> Trajectory {
    let mut truth = vec![start];
    let mut measurements = Vec::new();
    for _ in 0..steps {
        let next = harness::propagate(truth.last().unwrap().as_view(), w.as_view()).unwrap();
        measurements.push(harness::measure(next.as_view(), [0.0, 0.0]));
        truth.push(next);
    }
    Trajectory { truth, measurements }
}

#[test]
fn hrdf_tracks_deterministic_scenario() {
    let cfg = SimConfig {
        num_steps: 10,
        meas_noise_var: 1e-6,
        ..SimConfig::default()
    };
    let w = DVector::from_vec(vec![0.0, 0.6, 0.8]);
    let noise = DiracMixture::uniform(DMatrix::from_column_slice(3, 1, w.as_slice())).unwrap();
    let start = DVector::from_vec(vec![0.6, 0.0, 0.8]);
    for run in 0..3 {
        let track = harness::track_hrdf(&cfg, &noise, &deterministic_trajectory(start.clone(), &w, 10), run).unwrap();
        let last = *track.errors.last().unwrap();
        assert!(last < 0.1, "run {run}: final error {last}");
    }
}

#[test]
fn pf_tracks_static_truth_with_sharp_measurements() {
    let cfg = SimConfig {
        num_steps: 10,
        meas_noise_var: 1e-6,
        ..SimConfig::default()
    };
    let x = DVector::from_vec(vec![0.0, 0.6, 0.8]);
    let traj = Trajectory {
        truth: vec![x.clone(); 11],
        measurements: vec![harness::measure(x.as_view(), [0.0, 0.0]); 10],
    };
    let sampler = TrueNoiseSampler::new();
    for run in 0..3 {
        let track = harness::track_pf(&cfg, 500, &traj, run, &sampler).unwrap();
        let last = *track.errors.last().unwrap();
        assert!(last < 0.05, "run {run}: final error {last}");
    }
}

fn without_runtime(mut r: harness::RunResult) -> harness::RunResult {
    r.mean_runtime_ms_per_step = None;
    r
}

#[test]
fn pf_is_reproducible_and_improves_with_particles() {
    let cfg = SimConfig::default();
    let a = harness::run_particle_filter(&cfg, 100, 42).unwrap();
    let b = harness::run_particle_filter(&cfg, 100, 42).unwrap();
    assert!(a.mean_runtime_ms_per_step.unwrap() > 0.0);
    assert_eq!(without_runtime(a.clone()), without_runtime(b));
    assert_eq!(a.per_step_rmse.len(), 30);
    let big = harness::run_particle_filter(&cfg, 2000, 42).unwrap();
    assert!(
        big.rmse_final_rad <= 1.1 * a.rmse_final_rad,
        "{} vs {}",
        big.rmse_final_rad,
        a.rmse_final_rad
    );
}

#[test]
fn benchmark_rows_cover_every_pair() {
    let cfg = SimConfig {
        num_runs: 2,
        num_steps: 3,
        n_w_list: vec![20, 30],
        pf_particles_list: vec![50],
        source_size: 1000,
        ..SimConfig::default()
    };
    let b = harness::benchmark(&cfg).unwrap();
    let keys: Vec<(String, usize)> = b.rows.iter().map(|r| (r.method.clone(), r.samples)).collect();
    assert_eq!(
        keys,
        [
            ("hrdf".to_string(), 20),
            ("hrdf".to_string(), 30),
            ("pf".to_string(), 50)
        ]
    );
    assert!(b
        .to_csv()
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(3)
        .unwrap()
        .parse::<f64>()
        .is_ok());
    let csv = b.clone().without_runtime().to_csv();
    assert_eq!(
        csv.lines().next().unwrap(),
        "method,samples,rmse_rad,runtime_ms_per_step,runs,steps,seed"
    );
    assert_eq!(csv.lines().nth(1).unwrap().split(',').nth(3), Some(""));
    assert_eq!(csv, harness::benchmark(&cfg).unwrap().without_runtime().to_csv());
    assert!(b.row("pf", 50).is_some());

    let bad = SimConfig {
        num_runs: 0,
        meas_noise_var: 0.0,
        ..cfg
    };
    match harness::benchmark(&bad) {
        Err(Error::Config(msg)) => assert!(msg.contains("num_runs") && msg.contains("meas_noise_var"), "{msg}"),
        other => panic!("{other:?}"),
    }
}
