use hdmr::hcvmd::{hcvmd_distance, HcvmdObjective, HcvmdParams};
use hdmr::manifold::{normalize_columns, project_tangent, riemannian_hessian_action};
use hdmr::reapprox::{init_target, ReapproxConfig};
use hdmr::rng::derived_rng;
use hdmr::rtr::{gradient_descent_fallback, minimize, TrustRegionConfig};
use hdmr::sampling::{sample_vmf, uniform_sphere};
use hdmr::DiracMixture;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn instance(d: usize, n: usize, m: usize, seed: u64) -> (HcvmdObjective, DMatrix<f64>) {
    let mut rng = derived_rng(seed, "tests/derivatives");
    let source = DiracMixture::uniform(uniform_sphere(d, m, &mut rng)).unwrap();
    let obj = HcvmdObjective::uniform(source, n, HcvmdParams::for_target(d, n).unwrap()).unwrap();
    (obj, uniform_sphere(d, n, &mut rng))
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ambient_gradient_matches_differences(d in 3usize..6, n in 2usize..9, m in 5usize..40, seed in any::<u64>()) {
        let (obj, x) = instance(d, n, m, seed);
        let g = obj.gradient(&x).unwrap();
        let h = 1e-5;
        let fd = DMatrix::from_fn(d, n, |i, j| {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[(i, j)] += h;
            xm[(i, j)] -= h;
            (obj.value(&xp).unwrap() - obj.value(&xm).unwrap()) / (2.0 * h)
        });
        prop_assert!(rel(&fd, &g) < 1e-5, "{}", rel(&fd, &g));
    }

    #[test]
    fn hessian_action_matches_gradient_differences(d in 3usize..6, n in 2usize..9, m in 5usize..40, seed in any::<u64>()) {
        let (obj, x) = instance(d, n, m, seed);
        let mut rng = derived_rng(seed, "tests/direction");
        let u = uniform_sphere(d, n, &mut rng);
        let (_, _, cache) = obj.evaluate(&x).unwrap();
        let hu = obj.hess_action(&x, &cache, &u);
        let h = 1e-5;
        let fd = (obj.gradient(&(&x + &u * h)).unwrap() - obj.gradient(&(&x - &u * h)).unwrap()) / (2.0 * h);
        prop_assert!(rel(&fd, &hu) < 1e-4, "{}", rel(&fd, &hu));
    }
}

#[test]
fn riemannian_hessian_is_self_adjoint_on_tangent_space() {
    for seed in 0..10 {
        let (obj, x) = instance(3, 6, 30, seed);
        let x = normalize_columns(x).unwrap();
        let (_, eg, cache) = obj.evaluate(x.matrix()).unwrap();
        let mut rng = derived_rng(seed, "tests/tangent");
        let u = project_tangent(&x, &uniform_sphere(3, 6, &mut rng));
        let v = project_tangent(&x, &uniform_sphere(3, 6, &mut rng));
        let hu = riemannian_hessian_action(&x, &eg, &obj.hess_action(x.matrix(), &cache, u.matrix()), &u);
        let hv = riemannian_hessian_action(&x, &eg, &obj.hess_action(x.matrix(), &cache, v.matrix()), &v);
        let (a, b) = (v.inner(&hu), u.inner(&hv));
        assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()), "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn riemannian_gradient_predicts_retraction() {
    let (obj, x) = instance(3, 5, 25, 7);
    let x = normalize_columns(x).unwrap();
    let (f0, eg) = obj.value_gradient(x.matrix()).unwrap();
    let g = project_tangent(&x, &eg);
    let mut rng = derived_rng(7, "tests/retraction");
    let u = project_tangent(&x, &uniform_sphere(3, 5, &mut rng));
    let t = 1e-6;
    let xt = x.retract(&project_tangent(&x, &(u.matrix() * t))).unwrap();
    let slope = (obj.value(xt.matrix()).unwrap() - f0) / t;
    assert!(
        (slope - g.inner(&u)).abs() < 1e-4 * g.norm() * u.norm(),
        "{slope} vs {}",
        g.inner(&u)
    );
}

#[test]
fn trust_region_and_descent_reach_the_same_value() {
    let mu = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let source = sample_vmf(mu.as_view(), 5.0, 300, 3).unwrap();
    let cfg = ReapproxConfig::new(8, 3);
    let params = HcvmdParams::new(3, cfg.epsilon(3), 8).unwrap();
    let obj = HcvmdObjective::uniform(source.clone(), 8, params).unwrap();
    let x0 = init_target(&source, &cfg).unwrap();
    let (_, tr) = minimize(&obj, x0.clone(), &TrustRegionConfig::default()).unwrap();
    let (_, gd) = gradient_descent_fallback(&obj, x0, 1e-10, 20_000).unwrap();
    assert!(tr.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(gd.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    let gap = (tr.final_objective - gd.final_objective).abs();
    assert!(
        gap <= 1e-4 * tr.final_objective.abs(),
        "{} vs {}",
        tr.final_objective,
        gd.final_objective
    );

    let d3 = hcvmd_distance(&source, &source, &params, None).unwrap().d3;
    assert!(tr.final_objective + d3 > 0.0);
}
