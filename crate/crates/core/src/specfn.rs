//! Modified Bessel functions of the first kind and the quantities built on
//! them: the ratio `A_d(λ) = I_{d/2}(λ) / I_{d/2-1}(λ)`, its derivative and
//! inverse, and the von Mises–Fisher log-normalizer.
//!
//! Everything is evaluated in log space. Only integer and half-integer
//! orders are supported, which is all that dimensions `d >= 3` require.
//!
//! Regimes for `ln I_ν(x)`:
//! * `x <= max(20, ν²)`: the ascending power series. All terms are positive,
//!   so the sum carries full relative precision.
//! * half-integer `ν`, larger `x`: the terminating hyperbolic closed form.
//! * integer `ν`, larger `x`: the large-argument (Hankel) expansion, truncated
//!   at its smallest term.

use std::f64::consts::PI;

use crate::error::{domain, Result};

/// Order of a modified Bessel function. Stored as twice the order so that
/// half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BesselOrder {
    twice: i64,
}

impl BesselOrder {
    /// Accepts `nu >= -1/2` that is an integer or a half-integer.
    pub fn new(nu: f64) -> Result<Self> {
        let twice = 2.0 * nu;
        if !twice.is_finite() || twice.fract() != 0.0 || twice < -1.0 {
            return Err(domain(
                "BesselOrder::new",
                format!("order {nu} is not an integer or half-integer >= -1/2"),
            ));
        }
        Ok(Self { twice: twice as i64 })
    }

    /// `d/2 - 1`, the order of the vMF normalizer on `S^{d-1}`.
    pub fn vmf(d: usize) -> Self {
        Self { twice: d as i64 - 2 }
    }

    /// `d/2`, numerator order of the ratio `A_d`.
    pub fn vmf_upper(d: usize) -> Self {
        Self { twice: d as i64 }
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn is_half_integer(self) -> bool {
        self.twice % 2 != 0
    }
}

/// `ln Γ(ν + 1)` for integer or half-integer `ν >= -1/2`, by exact products.
fn ln_gamma_order_plus_one(order: BesselOrder) -> f64 {
    // Γ(ν+1) with ν+1 = twice/2 + 1
    let twice_arg = order.twice + 2;
    if twice_arg % 2 == 0 {
        let n = twice_arg / 2; // Γ(n) = (n-1)!
        (1..n).map(|k| (k as f64).ln()).sum()
    } else {
        // Γ(m + 1/2) = sqrt(π) ∏_{j=0}^{m-1} (j + 1/2)
        let m = (twice_arg - 1) / 2;
        0.5 * PI.ln() + (0..m).map(|j| (j as f64 + 0.5).ln()).sum::<f64>()
    }
}

fn series_threshold(nu: f64) -> f64 {
    20f64.max(nu * nu)
}

fn log_bessel_i_series(order: BesselOrder, x: f64) -> f64 {
    let nu = order.value();
    let q = 0.25 * x * x;
    let log_t0 = nu * (0.5 * x).ln() - ln_gamma_order_plus_one(order);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + nu));
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    log_t0 + sum.ln()
}

/// Terminating closed form for `ν = n + 1/2`, `n >= 0`, and the special
/// case `ν = -1/2`.
fn log_bessel_i_half_integer(order: BesselOrder, x: f64) -> f64 {
    let prefactor = -0.5 * (2.0 * PI * x).ln();
    if order.twice == -1 {
        // I_{-1/2}(x) = (2πx)^{-1/2} (e^x + e^{-x})
        return x + prefactor + (-2.0 * x).exp().ln_1p();
    }
    let n = ((order.twice - 1) / 2) as usize;
    // c_k = (n+k)! / (k! (n-k)! (2x)^k)
    let mut c = 1.0;
    let mut alternating = 1.0;
    let mut plain = 1.0;
    for k in 1..=n {
        let kf = k as f64;
        c *= ((n + k) as f64) * ((n + 1 - k) as f64) / (kf * 2.0 * x);
        plain += c;
        alternating += if k.is_multiple_of(2) { c } else { -c };
    }
    let sign = if n.is_multiple_of(2) { -1.0 } else { 1.0 };
    let tail = sign * (-2.0 * x).exp() * plain;
    x + prefactor + (alternating + tail).ln()
}

fn log_bessel_i_hankel(order: BesselOrder, x: f64) -> f64 {
    let mu = 4.0 * order.value().powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev_abs = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= prev_abs {
            break;
        }
        term = next;
        prev_abs = next.abs();
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    x - 0.5 * (2.0 * PI * x).ln() + sum.ln()
}

/// `ln I_ν(x)` for `x >= 0`.
///
/// Returns `-inf` at `x = 0` for `ν > 0`, `0` for `ν = 0` and `+inf` for
/// `ν = -1/2`.
pub fn log_bessel_i(order: BesselOrder, x: f64) -> Result<f64> {
    if !(x >= 0.0) || x.is_infinite() {
        return Err(domain("log_bessel_i", format!("argument {x} must be finite and >= 0")));
    }
    let nu = order.value();
    if x == 0.0 {
        return Ok(match order.twice {
            0 => 0.0,
            -1 => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        });
    }
    if x <= series_threshold(nu) {
        Ok(log_bessel_i_series(order, x))
    } else if order.is_half_integer() {
        Ok(log_bessel_i_half_integer(order, x))
    } else {
        Ok(log_bessel_i_hankel(order, x))
    }
}

fn check_dim(op: &'static str, d: usize) -> Result<()> {
    if d < 3 {
        return Err(domain(op, format!("dimension {d} must be >= 3")));
    }
    Ok(())
}

/// `I_{ν+1}(x) / I_ν(x)` by the Gauss continued fraction (modified Lentz).
fn bessel_ratio_cf(nu: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    // I_{ν+1}/I_ν = 1 / (2(ν+1)/x + 1 / (2(ν+2)/x + ...))
    let mut f = TINY;
    let mut c = f;
    let mut dd = 0.0;
    for k in 1..100_000 {
        let b = 2.0 * (nu + k as f64) / x;
        dd += b;
        if dd == 0.0 {
            dd = TINY;
        }
        c = b + 1.0 / c;
        if c == 0.0 {
            c = TINY;
        }
        dd = 1.0 / dd;
        let delta = c * dd;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}

/// `A_d(λ) = I_{d/2}(λ) / I_{d/2-1}(λ)`, the mean resultant length of a
/// vMF distribution on `S^{d-1}` with concentration `λ`.
pub fn bessel_ratio(d: usize, lambda: f64) -> Result<f64> {
    check_dim("bessel_ratio", d)?;
    if !(lambda >= 0.0) || lambda.is_infinite() {
        return Err(domain(
            "bessel_ratio",
            format!("concentration {lambda} must be finite and >= 0"),
        ));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let upper = log_bessel_i(BesselOrder::vmf_upper(d), lambda)?;
    let lower = log_bessel_i(BesselOrder::vmf(d), lambda)?;
    let r = (upper - lower).exp();
    if r.is_finite() && (0.0..1.0).contains(&r) {
        Ok(r)
    } else {
        Ok(bessel_ratio_cf(BesselOrder::vmf(d).value(), lambda))
    }
}

/// `A_d'(λ) = 1 - A_d(λ)² - (d-1)/λ · A_d(λ)`, defined for `λ > 0`.
///
/// The limit at zero, `1/d`, is available from [`bessel_ratio_deriv_at_zero`].
pub fn bessel_ratio_deriv(d: usize, lambda: f64) -> Result<f64> {
    check_dim("bessel_ratio_deriv", d)?;
    if !(lambda > 0.0) {
        return Err(domain(
            "bessel_ratio_deriv",
            format!("concentration {lambda} must be > 0"),
        ));
    }
    let a = bessel_ratio(d, lambda)?;
    Ok(1.0 - a * a - (d as f64 - 1.0) / lambda * a)
}

/// Right limit `A_d'(0+) = 1/d`.
pub fn bessel_ratio_deriv_at_zero(d: usize) -> f64 {
    1.0 / d as f64
}

/// Solves `A_d(λ) = r` for `λ`.
///
/// Starts from `λ₀ = r(d - r²)/(1 - r²)` and runs safeguarded Newton inside a
/// sign-change bracket, bisecting whenever a Newton step leaves it.
pub fn inv_bessel_ratio(d: usize, r: f64) -> Result<f64> {
    check_dim("inv_bessel_ratio", d)?;
    if !(0.0..1.0).contains(&r) {
        return Err(domain("inv_bessel_ratio", format!("ratio {r} must lie in [0, 1)")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let df = d as f64;
    let lambda0 = r * (df - r * r) / (1.0 - r * r);

    let mut lo = 0.0;
    let mut hi = 2.0 * lambda0 + 10.0;
    while bessel_ratio(d, hi)? < r {
        lo = hi;
        hi *= 2.0;
    }

    let mut lambda = lambda0.clamp(lo, hi);
    for _ in 0..50 {
        let a = bessel_ratio(d, lambda)?;
        let g = a - r;
        if g.abs() <= 1e-14 {
            return Ok(lambda);
        }
        if g < 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let slope = if lambda > 0.0 {
            1.0 - a * a - (df - 1.0) / lambda * a
        } else {
            1.0 / df
        };
        let newton = lambda - g / slope;
        lambda = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * hi {
            return Ok(lambda);
        }
    }
    // bisection until the bracket closes
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bessel_ratio(d, mid)? < r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `ln( λ^{d/2-1} / ((2π)^{d/2} I_{d/2-1}(λ)) )`, the log-normalizer of a
/// vMF density on `S^{d-1}`.
pub fn vmf_log_norm(d: usize, lambda: f64) -> Result<f64> {
    check_dim("vmf_log_norm", d)?;
    if !(lambda > 0.0) || lambda.is_infinite() {
        return Err(domain(
            "vmf_log_norm",
            format!("concentration {lambda} must be finite and > 0"),
        ));
    }
    let order = BesselOrder::vmf(d);
    Ok(order.value() * lambda.ln() - 0.5 * d as f64 * (2.0 * PI).ln() - log_bessel_i(order, lambda)?)
}

/// Log surface area of `S^{d-1}`, the `λ → 0` limit of `-vmf_log_norm`.
pub fn log_sphere_area(d: usize) -> f64 {
    let half = BesselOrder::new(d as f64 / 2.0 - 1.0).expect("d >= 2");
    // |S^{d-1}| = 2 π^{d/2} / Γ(d/2)
    2f64.ln() + 0.5 * d as f64 * PI.ln() - ln_gamma_order_plus_one(half)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct 60-term series, summed in plain arithmetic.
    fn series_oracle(nu: f64, x: f64) -> f64 {
        let mut total = 0.0;
        for k in 0..60 {
            let kf = k as f64;
            let log_term = (2.0 * kf + nu) * (0.5 * x).ln() - ln_factorial(k) - ln_gamma_half(kf + nu + 1.0);
            total += log_term.exp();
        }
        total
    }

    fn ln_factorial(k: usize) -> f64 {
        (1..=k).map(|j| (j as f64).ln()).sum()
    }

    // ln Γ(z) for z a positive integer or half-integer
    fn ln_gamma_half(z: f64) -> f64 {
        if z.fract() == 0.0 {
            ln_factorial(z as usize - 1)
        } else {
            let m = (z - 0.5) as usize;
            0.5 * PI.ln() + (0..m).map(|j| (j as f64 + 0.5).ln()).sum::<f64>()
        }
    }

    #[test]
    fn order_validation() {
        assert!(BesselOrder::new(0.3).is_err());
        assert!(BesselOrder::new(-1.0).is_err());
        assert!(BesselOrder::new(-0.5).is_ok());
        assert!(BesselOrder::new(2.5).unwrap().is_half_integer());
        assert!(log_bessel_i(BesselOrder::new(1.0).unwrap(), -1.0).is_err());
    }

    #[test]
    fn log_bessel_at_zero() {
        assert_eq!(log_bessel_i(BesselOrder::new(0.0).unwrap(), 0.0).unwrap(), 0.0);
        assert_eq!(
            log_bessel_i(BesselOrder::new(1.5).unwrap(), 0.0).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn half_order_closed_form() {
        let got = log_bessel_i(BesselOrder::new(0.5).unwrap(), 1.0).unwrap();
        let closed = ((2.0 / PI).sqrt() * 1f64.sinh()).ln();
        assert!((got - closed).abs() < 1e-14);
        assert!((got.exp() / series_oracle(0.5, 1.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn integer_order_matches_series() {
        let got = log_bessel_i(BesselOrder::new(1.0).unwrap(), 2.0).unwrap();
        assert!((got - 0.464_134_473_546_159_7).abs() < 1e-14);
        let oracle: f64 = (0..60)
            .map(|k| (2.0 * k as f64 + 1.0) * 1f64.ln() - ln_factorial(k) - ln_factorial(k + 1))
            .map(f64::exp)
            .sum();
        assert!((got.exp() / oracle - 1.0).abs() < 1e-13, "{} vs {oracle}", got.exp());
    }

    #[test]
    fn all_regimes_match_series_up_to_fifty() {
        for twice in -1..=10 {
            let order = BesselOrder { twice };
            let nu = order.value();
            for &x in &[0.01, 0.5, 3.0, 12.0, 19.9, 20.1, 25.0, 33.3, 42.0, 50.0] {
                let got = log_bessel_i(order, x).unwrap().exp();
                let want = series_oracle(nu, x);
                // 60 terms stop converging near x = 50 for the larger orders
                if x > 40.0 && nu < 0.0 {
                    continue;
                }
                assert!((got / want - 1.0).abs() < 1e-12, "nu={nu} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn regime_boundaries_are_continuous() {
        for twice in 0..=8 {
            let order = BesselOrder { twice };
            let t = series_threshold(order.value());
            let x = t * (1.0 + 1e-12);
            let series = log_bessel_i_series(order, x);
            let asymptotic = log_bessel_i(order, x).unwrap();
            assert!(
                (series - asymptotic).abs() < 1e-13,
                "order {twice}/2: {series} vs {asymptotic}"
            );
        }
    }

    #[test]
    fn large_arguments_stay_finite() {
        for d in 3..=6 {
            let v = log_bessel_i(BesselOrder::vmf(d), 1e4).unwrap();
            assert!(v.is_finite() && v > 9000.0);
            let a = bessel_ratio(d, 1e4).unwrap();
            assert!(a < 1.0 && a > 0.999);
        }
    }

    #[test]
    fn ratio_closed_form_on_s2() {
        assert_eq!(bessel_ratio(3, 0.0).unwrap(), 0.0);
        let a = bessel_ratio(3, 1.0).unwrap();
        let closed = 1.0 / 1f64.tanh() - 1.0;
        assert!((a - closed).abs() < 1e-14);
        assert!((a - 0.313035).abs() < 1e-6);
    }

    #[test]
    fn ratio_four_dim_from_series() {
        let a = bessel_ratio(4, 10.0).unwrap();
        let want = series_oracle(2.0, 10.0) / series_oracle(1.0, 10.0);
        assert!(a > 0.0 && a < 1.0);
        assert!((a - want).abs() < 1e-13);
    }

    #[test]
    fn continued_fraction_agrees_with_log_path() {
        for d in 3..=6 {
            for &x in &[0.1, 1.0, 10.0, 55.0, 300.0] {
                let cf = bessel_ratio_cf(BesselOrder::vmf(d).value(), x);
                let lg = bessel_ratio(d, x).unwrap();
                assert!((cf - lg).abs() < 1e-12, "d={d} x={x}: {cf} vs {lg}");
            }
        }
    }

    #[test]
    fn ratio_is_strictly_increasing() {
        for d in 3..=5 {
            let mut prev = -1.0;
            for i in 0..1000 {
                let lambda = 0.05 * i as f64 + 0.001 * (i as f64).powi(2);
                let a = bessel_ratio(d, lambda).unwrap();
                assert!(a > prev && a < 1.0, "d={d} λ={lambda}");
                prev = a;
            }
        }
    }

    #[test]
    fn derivative_closed_form_and_fd() {
        let a = 1.0 / 1f64.tanh() - 1.0;
        let want = 1.0 - a * a - 2.0 * a;
        let got = bessel_ratio_deriv(3, 1.0).unwrap();
        assert!((got - want).abs() < 1e-14);
        // 1 - A² - 2A with A = coth(1) - 1, evaluated in 30-digit arithmetic
        assert!((got - 0.275_938_339_033_689_5).abs() < 1e-14);

        let h = 1e-6;
        let fd = (bessel_ratio(3, 1.0 + h).unwrap() - bessel_ratio(3, 1.0 - h).unwrap()) / (2.0 * h);
        assert!((fd / got - 1.0).abs() < 1e-6);

        assert!((bessel_ratio_deriv(5, 0.001).unwrap() - 0.2).abs() < 1e-3);
        assert!(bessel_ratio_deriv(3, 0.0).is_err());
        assert_eq!(bessel_ratio_deriv_at_zero(5), 0.2);
    }

    #[test]
    fn derivative_matches_fd_on_grid() {
        for d in 3..=5 {
            for i in 0..=40 {
                let lambda = 0.01 * 10f64.powf(i as f64 * 4.0 / 40.0);
                let h = 1e-5 * lambda.max(1e-2);
                let fd = (bessel_ratio(d, lambda + h).unwrap() - bessel_ratio(d, lambda - h).unwrap()) / (2.0 * h);
                let an = bessel_ratio_deriv(d, lambda).unwrap();
                assert!((fd / an - 1.0).abs() < 1e-6, "d={d} λ={lambda}: {fd} vs {an}");
                assert!(an > 0.0);
            }
        }
    }

    #[test]
    fn inverse_round_trips() {
        assert_eq!(inv_bessel_ratio(3, 0.0).unwrap(), 0.0);
        let r = bessel_ratio(3, 5.0).unwrap();
        assert!((inv_bessel_ratio(3, r).unwrap() - 5.0).abs() < 1e-8);
        let lambda = inv_bessel_ratio(4, 0.8).unwrap();
        assert!((bessel_ratio(4, lambda).unwrap() - 0.8).abs() <= 1e-10);
        assert!(inv_bessel_ratio(3, 1.0).is_err());
        assert!(inv_bessel_ratio(3, -0.1).is_err());
    }

    #[test]
    fn inverse_is_identity_over_range() {
        for d in 3..=5 {
            for i in 0..=60 {
                let lambda = 1e-3 * 10f64.powf(i as f64 * (500f64 / 1e-3).log10() / 60.0);
                let back = inv_bessel_ratio(d, bessel_ratio(d, lambda).unwrap()).unwrap();
                assert!(
                    (back - lambda).abs() <= 1e-8 * lambda.max(1.0),
                    "d={d} λ={lambda} back={back}"
                );
            }
        }
    }

    #[test]
    fn vmf_normalizer_on_s2() {
        let got = vmf_log_norm(3, 1.0).unwrap();
        let want = (1.0 / (4.0 * PI * 1f64.sinh())).ln();
        assert!((got - want).abs() < 1e-13);
        let near_uniform = vmf_log_norm(3, 1e-6).unwrap();
        assert!((near_uniform - (1.0 / (4.0 * PI)).ln()).abs() < 1e-6);
        assert!(vmf_log_norm(3, 0.0).is_err());
        assert!((log_sphere_area(3) - (4.0 * PI).ln()).abs() < 1e-14);
        assert!((log_sphere_area(4) - (2.0 * PI * PI).ln()).abs() < 1e-14);
    }
}
