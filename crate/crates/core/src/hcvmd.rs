//! Hyperspherical Cramér–von Mises distance between Dirac mixtures.
//!
//! Both mixtures are smoothed by the kernel `exp(τ αᵀx)` over all kernel
//! locations `α ∈ S^{d-1}` and concentrations `τ > 0`; the distance is the
//! weighted integral of the squared difference. With the weighting
//! `W(τ) = e^{-ετ} τ^{d/2-2}` every pairwise term has the closed form
//!
//! ```text
//! Q(δ) = (2π)^{d/2} / (d/2 - 1) · (ζ + ε)^{1-d/2},   ζ = sqrt(ε² - 2 - 2δ),
//! ```
//!
//! where `δ = uᵀv`, and `D = D₁ - 2D₂ + D₃` sums `Q` over target/target,
//! target/source and source/source pairs.
//!
//! Derivatives use `χ = dQ/dδ = (2π)^{d/2} / (ζ (ζ+ε)^{d/2})` and
//! `dχ/dδ = c·χ` with `c = ((2+d)ζ + 2ε) / (2 (ζ+ε) ζ²)`. The constant `c`
//! (with the factor ½) and the cross block `∂²Q/∂u∂vᵀ = χ (c·v uᵀ + I)` are
//! what differentiating the gradient gives; the finite-difference tests in
//! this module and in `tests/derivatives.rs` pin them down.
//!
//! Batched evaluations work on Gram matrices and apply `Q` to raw inner
//! products without clamping, i.e. on the natural extension of `Q` to the
//! ambient space. That keeps gradients and Hessians exact derivatives of the
//! evaluated function. Only [`hcvmd_unit`] clamps `δ` to `[-1, 1]`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{domain, Error, Result};
use crate::mixture::DiracMixture;
use crate::quadrature::integrate;

/// Parameters of the distance: the dimension of the ambient space, the
/// weighting parameter `ε > 2` and the target size it was chosen for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HcvmdParams {
    pub d: usize,
    pub epsilon: f64,
    pub n_target: usize,
}

impl HcvmdParams {
    pub fn new(d: usize, epsilon: f64, n_target: usize) -> Result<Self> {
        if d < 3 {
            return Err(domain("HcvmdParams::new", format!("dimension {d} must be >= 3")));
        }
        if !(epsilon > 2.0) || !epsilon.is_finite() {
            return Err(domain(
                "HcvmdParams::new",
                format!("epsilon {epsilon} must be finite and > 2"),
            ));
        }
        Ok(Self { d, epsilon, n_target })
    }

    /// `ε` from the default schedule [`epsilon_for`].
    pub fn for_target(d: usize, n_target: usize) -> Result<Self> {
        Self::new(d, epsilon_for(d, n_target.max(1)), n_target)
    }

    pub(crate) fn kernel(&self) -> Kernel {
        Kernel::new(self.d, self.epsilon)
    }
}

/// Crossover size of the `ε` schedule, `n_ε = d^{1/(d-1)}`, where both
/// branches meet.
pub fn epsilon_threshold(d: usize) -> f64 {
    (d as f64).powf(1.0 / (d as f64 - 1.0))
}

/// `ε = 2 + n^{-d}` for `n <= n_ε`, otherwise `2 + 1/(d·n)`.
pub fn epsilon_for(d: usize, n: usize) -> f64 {
    epsilon_for_with_threshold(d, n, epsilon_threshold(d))
}

/// [`epsilon_for`] with an explicit crossover `n_ε`.
pub fn epsilon_for_with_threshold(d: usize, n: usize, n_eps: f64) -> f64 {
    let nf = n as f64;
    if nf <= n_eps {
        2.0 + nf.powi(-(d as i32))
    } else {
        2.0 + 1.0 / (d as f64 * nf)
    }
}

/// Geometry of one pair of points: `δ = uᵀv`, `ζ` and the gradient norm `χ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub delta: f64,
    pub zeta: f64,
    pub chi: f64,
}

impl PairGeometry {
    pub fn new(delta: f64, params: &HcvmdParams) -> Result<Self> {
        let delta = clamp_delta(delta)?;
        let k = params.kernel();
        let (zeta, _, chi, _) = k.eval(delta);
        Ok(Self { delta, zeta, chi })
    }
}

fn clamp_delta(delta: f64) -> Result<f64> {
    if !(delta.abs() <= 1.0 + 1e-12) {
        return Err(domain("hcvmd_unit", format!("inner product {delta} outside [-1, 1]")));
    }
    Ok(delta.clamp(-1.0, 1.0))
}

/// Closed-form pair term `Q(δ)`.
pub fn hcvmd_unit(delta: f64, params: &HcvmdParams) -> Result<f64> {
    let delta = clamp_delta(delta)?;
    Ok(params.kernel().q(delta))
}

/// Reference value of `Q(uᵀv)` on `S²` by numerical integration over the
/// kernel concentration, using the closed-form location integral
/// `P(δ, τ) = 4π sinh(aτ)/(aτ)`, `a = sqrt(2 + 2δ)`.
pub fn hcvmd_unit_numeric(u: DVectorView<'_, f64>, v: DVectorView<'_, f64>, params: &HcvmdParams) -> Result<f64> {
    if params.d != 3 || u.len() != 3 || v.len() != 3 {
        return Err(domain(
            "hcvmd_unit_numeric",
            "the numerical reference exists for d = 3 only",
        ));
    }
    let delta = clamp_delta(u.dot(&v))?;
    hcvmd_unit_numeric_delta(delta, params.epsilon)
}

/// [`hcvmd_unit_numeric`] for a given inner product on `S²`.
pub fn hcvmd_unit_numeric_delta(delta: f64, epsilon: f64) -> Result<f64> {
    let a = (2.0 + 2.0 * delta).max(0.0).sqrt();
    // τ = s²: ∫ 2s · e^{-ε s²} s^{-1} · 4π sinh(a s²)/(a s²) ds
    //       = ∫ 4π e^{-(ε-a) s²} (1 - e^{-2a s²}) / (a s²) ds
    let integrand = move |s: f64| {
        let t = s * s;
        let y = a * t;
        let shape = if y == 0.0 { 2.0 } else { -(-2.0 * y).exp_m1() / y };
        4.0 * PI * (-(epsilon - a) * t).exp() * shape
    };
    let upper = (50.0 / (epsilon - a)).sqrt();
    // split where the integrand changes scale so the adaptive rule sees structure
    let knots = [0.0, upper / 64.0, upper / 16.0, upper / 4.0, upper];
    let mut total = 0.0;
    for w in knots.windows(2) {
        total += integrate(integrand, w[0], w[1], 1e-13)?;
    }
    Ok(total)
}

/// Precomputed constants of `Q` and its derivatives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel {
    d: usize,
    eps: f64,
    eps2m2: f64,
    two_pi_half_d: f64,
    q_scale: f64,
}

impl Kernel {
    pub(crate) fn new(d: usize, eps: f64) -> Self {
        let two_pi_half_d = (2.0 * PI).powf(d as f64 / 2.0);
        Self {
            d,
            eps,
            eps2m2: eps * eps - 2.0,
            two_pi_half_d,
            q_scale: two_pi_half_d / (d as f64 / 2.0 - 1.0),
        }
    }

    /// `s^{1-d/2}` from `1/s`.
    #[inline]
    fn pow_inv(&self, inv_s: f64) -> f64 {
        match self.d {
            3 => inv_s.sqrt(),
            4 => inv_s,
            5 => inv_s * inv_s.sqrt(),
            6 => inv_s * inv_s,
            d if d % 2 == 0 => inv_s.powi((d / 2 - 1) as i32),
            d => inv_s.powi(((d - 3) / 2) as i32) * inv_s.sqrt(),
        }
    }

    #[inline]
    fn zeta(&self, delta: f64) -> f64 {
        (self.eps2m2 - 2.0 * delta).sqrt()
    }

    #[inline]
    pub(crate) fn q(&self, delta: f64) -> f64 {
        self.q_scale * self.pow_inv(1.0 / (self.zeta(delta) + self.eps))
    }

    /// `(Q, χ)`.
    #[inline]
    pub(crate) fn q_chi(&self, delta: f64) -> (f64, f64) {
        let zeta = self.zeta(delta);
        let inv_s = 1.0 / (zeta + self.eps);
        let p = self.pow_inv(inv_s);
        (self.q_scale * p, self.two_pi_half_d * p * inv_s / zeta)
    }

    /// `(ζ, Q, χ, dχ/dδ)`.
    #[inline]
    pub(crate) fn eval(&self, delta: f64) -> (f64, f64, f64, f64) {
        let zeta = self.zeta(delta);
        let inv_s = 1.0 / (zeta + self.eps);
        let inv_z = 1.0 / zeta;
        let p = self.pow_inv(inv_s);
        let chi = self.two_pi_half_d * p * inv_s * inv_z;
        let c = ((2.0 + self.d as f64) * zeta + 2.0 * self.eps) * 0.5 * inv_s * inv_z * inv_z;
        (zeta, self.q_scale * p, chi, c * chi)
    }
}

/// Components of the distance: `total = d1 - 2·d2 + d3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HcvmdValue {
    pub total: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

fn check_dims(target: &DiracMixture, source: &DiracMixture, params: &HcvmdParams) -> Result<()> {
    if target.dim() != params.d || source.dim() != params.d {
        return Err(Error::DimensionMismatch(format!(
            "target d={}, source d={}, params d={}",
            target.dim(),
            source.dim(),
            params.d
        )));
    }
    Ok(())
}

fn check_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(
            "hcvmd",
            format!("{what} is not finite; inner products left the domain of Q"),
        ))
    }
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// Pair kernels are monomorphized for small dimensions so the inner
// products unroll; `D = 0` is the runtime-dimension fallback.

#[inline(always)]
fn dot_n<const D: usize>(a: &[f64], b: &[f64]) -> f64 {
    if D == 0 {
        return dot(a, b);
    }
    let (a, b) = (&a[..D], &b[..D]);
    let mut s = 0.0;
    for k in 0..D {
        s += a[k] * b[k];
    }
    s
}

#[inline(always)]
fn axpy_n<const D: usize>(alpha: f64, x: &[f64], acc: &mut [f64]) {
    if D == 0 {
        acc.iter_mut().zip(x).for_each(|(p, v)| *p += alpha * v);
        return;
    }
    let (x, acc) = (&x[..D], &mut acc[..D]);
    for k in 0..D {
        acc[k] += alpha * x[k];
    }
}

macro_rules! by_dim {
    ($d:expr, $f:ident($($arg:expr),*)) => {
        match $d {
            3 => $f::<3>($($arg),*),
            4 => $f::<4>($($arg),*),
            5 => $f::<5>($($arg),*),
            _ => $f::<0>($($arg),*),
        }
    };
}

fn cross_row<const D: usize>(kernel: &Kernel, xi: &[f64], y: &[f64], b: &[f64], d: usize) -> f64 {
    let mut row = 0.0;
    for (yr, br) in y.chunks_exact(d).zip(b) {
        row += br * kernel.q(dot_n::<D>(xi, yr));
    }
    row
}

/// Source pass of an evaluation at one target point: returns the `D₂` row
/// and adds `Σᵣ ω̊ᵣ χᵢᵣ x̊ᵣ` into `pull`.
fn source_pass<const D: usize>(
    kernel: &Kernel,
    xi: &[f64],
    y: &[f64],
    b: &[f64],
    d: usize,
    scatter: Option<&mut [f64]>,
    pull: &mut [f64],
) -> f64 {
    let mut row = 0.0;
    match scatter {
        Some(sc) => {
            for (yr, br) in y.chunks_exact(d).zip(b) {
                let (_, q, chi, dc) = kernel.eval(dot_n::<D>(xi, yr));
                row += br * q;
                axpy_n::<D>(br * chi, yr, pull);
                let c = br * dc;
                for (k, col) in sc.chunks_exact_mut(d).enumerate() {
                    axpy_n::<D>(c * yr[k], yr, col);
                }
            }
        }
        None => {
            for (yr, br) in y.chunks_exact(d).zip(b) {
                let (q, chi) = kernel.q_chi(dot_n::<D>(xi, yr));
                row += br * q;
                axpy_n::<D>(br * chi, yr, pull);
            }
        }
    }
    row
}

/// `Σᵢ Σᵣ aᵢ bᵣ Q(xᵢᵀ yᵣ)`.
pub(crate) fn cross_energy(
    kernel: &Kernel,
    x: &DMatrix<f64>,
    a: &DVector<f64>,
    y: &DMatrix<f64>,
    b: &DVector<f64>,
) -> f64 {
    let d = x.nrows();
    let mut acc = CompensatedSum::default();
    for (i, xi) in x.as_slice().chunks_exact(d).enumerate() {
        let row = by_dim!(d, cross_row(kernel, xi, y.as_slice(), b.as_slice(), d));
        acc.add(a[i] * row);
    }
    acc.value()
}

/// `Σᵣ Σₛ bᵣ bₛ Q(yᵣᵀ yₛ)` using the symmetry of the pair term.
pub(crate) fn self_energy(kernel: &Kernel, y: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let d = y.nrows();
    let ys = y.as_slice();
    let mut acc = CompensatedSum::default();
    for (r, yr) in ys.chunks_exact(d).enumerate() {
        let off = by_dim!(d, cross_row(kernel, yr, &ys[(r + 1) * d..], &b.as_slice()[r + 1..], d));
        acc.add(b[r] * (2.0 * off + b[r] * kernel.q(dot(yr, yr))));
    }
    acc.value()
}

/// The source-only term `D₃`; constant during reapproximation, so callers
/// compute it once and pass it back through `cached_d3`.
pub fn hcvmd_source_term(source: &DiracMixture, params: &HcvmdParams) -> Result<f64> {
    if source.dim() != params.d {
        return Err(Error::DimensionMismatch(format!(
            "source d={}, params d={}",
            source.dim(),
            params.d
        )));
    }
    check_finite(self_energy(&params.kernel(), source.points(), source.weights()), "D3")
}

/// Distance between `target` and `source` with its three components.
pub fn hcvmd_distance(
    target: &DiracMixture,
    source: &DiracMixture,
    params: &HcvmdParams,
    cached_d3: Option<f64>,
) -> Result<HcvmdValue> {
    check_dims(target, source, params)?;
    let kernel = params.kernel();
    let d1 = check_finite(self_energy(&kernel, target.points(), target.weights()), "D1")?;
    let d2 = check_finite(
        cross_energy(
            &kernel,
            target.points(),
            target.weights(),
            source.points(),
            source.weights(),
        ),
        "D2",
    )?;
    let d3 = match cached_d3 {
        Some(v) => v,
        None => hcvmd_source_term(source, params)?,
    };
    Ok(HcvmdValue {
        total: d1 - 2.0 * d2 + d3,
        d1,
        d2,
        d3,
    })
}

/// Per-point cache of pair quantities at a target configuration, reused by
/// every Hessian action at that configuration.
#[derive(Debug, Clone)]
pub struct HcvmdEval {
    /// `ωⱼ χ(xᵢ, xⱼ)` laid out `[j, i]`.
    w_chi_tt: DMatrix<f64>,
    /// `ωⱼ dχ/dδ (xᵢ, xⱼ)` laid out `[j, i]`.
    w_dchi_tt: DMatrix<f64>,
    /// Column `i` holds the `d×d` matrix `Σᵣ ω̊ᵣ dχ/dδ(xᵢ, x̊ᵣ) x̊ᵣ x̊ᵣᵀ`, so
    /// the source part of a Hessian action costs `O(n d²)` instead of a
    /// pass over the source.
    src_scatter: DMatrix<f64>,
}

/// Objective `D₁ − 2D₂` (the distance without its constant source term),
/// its ambient gradient and, on request, the pair cache.
pub(crate) fn evaluate_target(
    kernel: &Kernel,
    x: &DMatrix<f64>,
    w: &DVector<f64>,
    source: &DiracMixture,
    with_cache: bool,
) -> Result<(f64, DMatrix<f64>, Option<HcvmdEval>)> {
    let d = x.nrows();
    let n = x.ncols();
    let y = source.points();
    let b = source.weights();
    let xs: Vec<&[f64]> = x.as_slice().chunks_exact(d).collect();

    let mut w_chi_tt = DMatrix::zeros(n, n);
    let mut w_dchi_tt = DMatrix::zeros(n, n);
    let mut d1 = CompensatedSum::default();
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let (_, q, chi, dchi) = kernel.eval(dot(xs[i], xs[j]));
            row += w[j] * q;
            w_chi_tt[(j, i)] = w[j] * chi;
            w_dchi_tt[(j, i)] = w[j] * dchi;
        }
        d1.add(w[i] * row);
    }

    // column i: 2ωᵢ Σⱼ ωⱼ χᵢⱼ xⱼ − 2ωᵢ Σᵣ ω̊ᵣ χᵢᵣ x̊ᵣ
    let mut grad = x * &w_chi_tt;
    let mut src_scatter = if with_cache {
        DMatrix::zeros(d * d, n)
    } else {
        DMatrix::zeros(0, 0)
    };
    let mut d2 = CompensatedSum::default();
    let mut pull = vec![0.0; d];
    for i in 0..n {
        pull.iter_mut().for_each(|v| *v = 0.0);
        let mut cache_col = with_cache.then(|| src_scatter.column_mut(i));
        let slot = cache_col.as_mut().map(|c| c.as_mut_slice());
        let row = by_dim!(
            d,
            source_pass(kernel, xs[i], y.as_slice(), b.as_slice(), d, slot, &mut pull)
        );
        d2.add(w[i] * row);
        let mut col = grad.column_mut(i);
        for k in 0..d {
            col[k] = 2.0 * w[i] * (col[k] - pull[k]);
        }
    }

    let value = d1.value() - 2.0 * d2.value();
    check_finite(value, "D1 - 2 D2")?;
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(domain("hcvmd", "gradient is not finite"));
    }
    let cache = with_cache.then_some(HcvmdEval {
        w_chi_tt,
        w_dchi_tt,
        src_scatter,
    });
    Ok((value, grad, cache))
}

/// Ambient Hessian of `D` applied to `u`, from a cache built at `x`.
pub(crate) fn hess_action_cached(
    x: &DMatrix<f64>,
    w: &DVector<f64>,
    cache: &HcvmdEval,
    u: &DMatrix<f64>,
) -> DMatrix<f64> {
    let d = x.nrows();
    let n = x.ncols();
    // target/target: 2ωᵢ Σⱼ [ωⱼ χ'ᵢⱼ xⱼ (xⱼᵀUᵢ + xᵢᵀUⱼ) + ωⱼ χᵢⱼ Uⱼ]
    let a = x.tr_mul(u); // [j, i] = xⱼᵀUᵢ
    let coeff = DMatrix::from_fn(n, n, |j, i| cache.w_dchi_tt[(j, i)] * (a[(j, i)] + a[(i, j)]));
    let mut out = x * coeff + u * &cache.w_chi_tt;

    // target/source: −2ωᵢ Σᵣ ω̊ᵣ χ'ᵢᵣ x̊ᵣ (x̊ᵣᵀUᵢ) = −2ωᵢ Mᵢ Uᵢ
    for i in 0..n {
        let mi = cache.src_scatter.column(i);
        let ui = u.column(i);
        let mut col = out.column_mut(i);
        for k in 0..d {
            let pull: f64 = (0..d).map(|l| mi[k * d + l] * ui[l]).sum();
            col[k] = 2.0 * w[i] * (col[k] - pull);
        }
    }
    out
}

/// Ambient gradient of `D` with respect to the target points (`d×n`).
pub fn hcvmd_egrad(target: &DiracMixture, source: &DiracMixture, params: &HcvmdParams) -> Result<DMatrix<f64>> {
    check_dims(target, source, params)?;
    let (_, grad, _) = evaluate_target(&params.kernel(), target.points(), target.weights(), source, false)?;
    Ok(grad)
}

/// Ambient Hessian of `D` with respect to the target points, applied to `u`
/// without forming the `dn × dn` matrix.
pub fn hcvmd_ehess_action(
    target: &DiracMixture,
    source: &DiracMixture,
    params: &HcvmdParams,
    u: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_dims(target, source, params)?;
    if u.shape() != target.points().shape() {
        return Err(Error::DimensionMismatch(format!(
            "direction is {:?}, target is {:?}",
            u.shape(),
            target.points().shape()
        )));
    }
    let (_, _, cache) = evaluate_target(&params.kernel(), target.points(), target.weights(), source, true)?;
    Ok(hess_action_cached(
        target.points(),
        target.weights(),
        &cache.expect("cache requested"),
        u,
    ))
}

/// Distance objective evaluated on raw ambient matrices, for callers that
/// move target points off the sphere (finite differences, solvers).
#[derive(Debug, Clone)]
pub struct HcvmdObjective {
    source: DiracMixture,
    target_weights: DVector<f64>,
    params: HcvmdParams,
    kernel: Kernel,
}

impl HcvmdObjective {
    pub fn new(source: DiracMixture, target_weights: DVector<f64>, params: HcvmdParams) -> Result<Self> {
        if source.dim() != params.d {
            return Err(Error::DimensionMismatch(format!(
                "source d={}, params d={}",
                source.dim(),
                params.d
            )));
        }
        let kernel = params.kernel();
        Ok(Self {
            source,
            target_weights,
            params,
            kernel,
        })
    }

    /// Uniform target weights `1/n`.
    pub fn uniform(source: DiracMixture, n: usize, params: HcvmdParams) -> Result<Self> {
        Self::new(source, DVector::from_element(n, 1.0 / n as f64), params)
    }

    pub fn params(&self) -> &HcvmdParams {
        &self.params
    }

    pub fn source(&self) -> &DiracMixture {
        &self.source
    }

    pub fn target_weights(&self) -> &DVector<f64> {
        &self.target_weights
    }

    fn check(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.nrows() != self.params.d || x.ncols() != self.target_weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "target matrix is {}x{}, objective expects {}x{}",
                x.nrows(),
                x.ncols(),
                self.params.d,
                self.target_weights.len()
            )));
        }
        Ok(())
    }

    /// `D₁ − 2D₂` at `x`.
    pub fn value(&self, x: &DMatrix<f64>) -> Result<f64> {
        self.check(x)?;
        let d1 = self_energy(&self.kernel, x, &self.target_weights);
        let d2 = cross_energy(
            &self.kernel,
            x,
            &self.target_weights,
            self.source.points(),
            self.source.weights(),
        );
        check_finite(d1 - 2.0 * d2, "D1 - 2 D2")
    }

    /// Value, ambient gradient and the pair cache for Hessian actions.
    pub fn evaluate(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>, HcvmdEval)> {
        self.check(x)?;
        let (v, g, c) = evaluate_target(&self.kernel, x, &self.target_weights, &self.source, true)?;
        Ok((v, g, c.expect("cache requested")))
    }

    pub fn gradient(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.value_gradient(x)?.1)
    }

    /// `D₁ − 2D₂` and its ambient gradient in one pass.
    pub fn value_gradient(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        self.check(x)?;
        let (v, g, _) = evaluate_target(&self.kernel, x, &self.target_weights, &self.source, false)?;
        Ok((v, g))
    }

    pub fn hess_action(&self, x: &DMatrix<f64>, cache: &HcvmdEval, u: &DMatrix<f64>) -> DMatrix<f64> {
        hess_action_cached(x, &self.target_weights, cache, u)
    }
}
