//! Random source sets on `S^{d-1}`: uniform, von Mises–Fisher and Bingham.

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::Rng as _;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::mixture::DiracMixture;
use crate::rng::{rng_from_seed, Rng};

/// `count` independent uniform points as columns of a `d×count` matrix.
pub fn uniform_sphere(d: usize, count: usize, rng: &mut Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, count);
    for mut col in m.column_iter_mut() {
        loop {
            for v in col.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let norm = col.norm();
            if norm > 1e-12 {
                col /= norm;
                break;
            }
        }
    }
    m
}

/// Draws single samples of `vMF(μ, λ)`.
///
/// The cosine `w = μᵀx` is drawn by exact inverse CDF on `S²` and by Wood's
/// rejection scheme otherwise; the tangential part is a uniform direction
/// orthogonal to `μ`.
#[derive(Debug, Clone)]
pub struct VmfSampler {
    mu: DVector<f64>,
    lambda: f64,
    wood: Option<WoodConstants>,
}

#[derive(Debug, Clone)]
struct WoodConstants {
    b: f64,
    x0: f64,
    c: f64,
    beta: Beta<f64>,
}

impl VmfSampler {
    pub fn new(mu: DVectorView<'_, f64>, lambda: f64) -> Result<Self> {
        let d = mu.len();
        if d < 2 {
            return Err(domain("VmfSampler::new", "dimension must be >= 2"));
        }
        if ((mu.norm() - 1.0).abs()) > 1e-9 {
            return Err(domain(
                "VmfSampler::new",
                format!("mean direction has norm {}", mu.norm()),
            ));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(domain(
                "VmfSampler::new",
                format!("concentration {lambda} must be >= 0"),
            ));
        }
        let wood = if d != 3 && lambda > 0.0 {
            let dm1 = (d - 1) as f64;
            let b = dm1 / (2.0 * lambda + (4.0 * lambda * lambda + dm1 * dm1).sqrt());
            let x0 = (1.0 - b) / (1.0 + b);
            let c = lambda * x0 + dm1 * (1.0 - x0 * x0).ln();
            let beta = Beta::new(dm1 / 2.0, dm1 / 2.0).map_err(|e| domain("VmfSampler::new", e.to_string()))?;
            Some(WoodConstants { b, x0, c, beta })
        } else {
            None
        };
        Ok(Self {
            mu: mu.normalize(),
            lambda,
            wood,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn cosine(&self, rng: &mut Rng) -> f64 {
        let d = self.dim();
        if self.lambda == 0.0 {
            // marginal of a uniform direction
            let beta = Beta::new((d - 1) as f64 / 2.0, (d - 1) as f64 / 2.0).expect("valid beta");
            return 2.0 * beta.sample(rng) - 1.0;
        }
        if let Some(w) = &self.wood {
            let dm1 = (d - 1) as f64;
            loop {
                let z = w.beta.sample(rng);
                let cosine = (1.0 - (1.0 + w.b) * z) / (1.0 - (1.0 - w.b) * z);
                let u: f64 = 1.0 - rng.random::<f64>();
                if self.lambda * cosine + dm1 * (1.0 - w.x0 * cosine).ln() - w.c >= u.ln() {
                    return cosine;
                }
            }
        }
        // S²: F⁻¹(u) = 1 + ln(u + (1 - u) e^{-2λ}) / λ
        let u: f64 = 1.0 - rng.random::<f64>();
        let e = (-2.0 * self.lambda).exp();
        (1.0 + (u + (1.0 - u) * e).ln() / self.lambda).clamp(-1.0, 1.0)
    }

    /// Writes one sample into `out` (length `d`).
    pub fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        let d = self.dim();
        let w = self.cosine(rng);
        let mut tangent = DVector::<f64>::zeros(d);
        loop {
            for v in tangent.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let along = tangent.dot(&self.mu);
            tangent.axpy(-along, &self.mu, 1.0);
            let norm = tangent.norm();
            if norm > 1e-12 {
                tangent /= norm;
                break;
            }
        }
        let s = (1.0 - w * w).max(0.0).sqrt();
        let mut norm2 = 0.0;
        for k in 0..d {
            out[k] = w * self.mu[k] + s * tangent[k];
            norm2 += out[k] * out[k];
        }
        let norm = norm2.sqrt();
        out.iter_mut().for_each(|v| *v /= norm);
    }

    pub fn sample_matrix(&self, count: usize, rng: &mut Rng) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), count);
        for mut col in m.column_iter_mut() {
            self.sample_into(rng, col.as_mut_slice());
        }
        m
    }
}

/// `count` i.i.d. samples of `vMF(μ, λ)` with uniform weights.
pub fn sample_vmf(mu: DVectorView<'_, f64>, lambda: f64, count: usize, seed: u64) -> Result<DiracMixture> {
    let sampler = VmfSampler::new(mu, lambda)?;
    let mut rng = rng_from_seed(seed);
    DiracMixture::uniform(sampler.sample_matrix(count, &mut rng))
}

/// `count` samples of the Bingham density `∝ exp(xᵀCx)` by rejection from
/// the uniform distribution. `C` must be symmetric with largest eigenvalue
/// at most zero, so `exp(xᵀCx) <= 1` is a valid acceptance probability.
pub fn sample_bingham(c: &DMatrix<f64>, count: usize, seed: u64) -> Result<DiracMixture> {
    let d = c.nrows();
    if c.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "Bingham matrix is {}x{}",
            d,
            c.ncols()
        )));
    }
    if (c - c.transpose()).amax() > 1e-12 {
        return Err(domain("sample_bingham", "parameter matrix is not symmetric"));
    }
    let max_eig = c.clone().symmetric_eigen().eigenvalues.max();
    if max_eig > 1e-12 {
        return Err(domain(
            "sample_bingham",
            format!("largest eigenvalue {max_eig} exceeds 0"),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut out = DMatrix::zeros(d, count);
    let mut accepted = 0;
    let mut proposed = 0usize;
    let mut x = DVector::<f64>::zeros(d);
    let mut warned = false;
    while accepted < count {
        for v in x.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let norm = x.norm();
        if norm < 1e-12 {
            continue;
        }
        x /= norm;
        proposed += 1;
        let log_accept = (c * &x).dot(&x);
        let u: f64 = rng.random();
        if u < log_accept.exp() {
            out.set_column(accepted, &x);
            accepted += 1;
        }
        if !warned && proposed == 10_000 && accepted < 100 {
            log::warn!("Bingham rejection sampler acceptance rate below 1% ({accepted}/{proposed})");
            warned = true;
        }
    }
    DiracMixture::uniform(out)
}

/// Rotation matrix (orthogonal, det +1) mapping unit `from` onto unit `to`.
pub fn rotation_between(from: DVectorView<'_, f64>, to: DVectorView<'_, f64>) -> DMatrix<f64> {
    let d = from.len();
    // Composition of two Householder reflections: H(to - r) H(from - r) with
    // r a helper direction keeps the determinant at +1.
    let reflect = |v: &DVector<f64>| -> DMatrix<f64> {
        let n2 = v.norm_squared();
        if n2 < 1e-30 {
            DMatrix::identity(d, d)
        } else {
            DMatrix::identity(d, d) - v * v.transpose() * (2.0 / n2)
        }
    };
    let from = from.into_owned();
    let to = to.into_owned();
    // reflect `from` to `-to`, then reflect across the hyperplane orthogonal to `to`
    let first = reflect(&(&from + &to));
    let second = reflect(&to);
    second * first
}

/// A Haar-distributed random rotation in `SO(d)` (QR of a Gaussian matrix).
pub fn random_rotation(d: usize, rng: &mut Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    if q.determinant() < 0.0 {
        let mut col = q.column_mut(0);
        col *= -1.0;
    }
    q
}
