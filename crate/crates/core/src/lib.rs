//! Hyperspherical Dirac mixture reapproximation.
//!
//! A weighted point set on the unit hypersphere `S^{d-1}` is compressed into
//! a small equally weighted one by minimizing a closed-form Cramér–von Mises
//! type distance on the oblique manifold. On top of that sit a shared
//! concentration von Mises–Fisher mixture fit and a discrete Bayesian filter
//! that reapproximates its posterior at every step.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod hcvmd;
pub mod hrdf;
pub mod io;
pub mod lattice;
pub mod manifold;
pub mod mixture;
pub mod oracle;
pub mod quadrature;
pub mod reapprox;
pub mod reconstruct;
pub mod rng;
pub mod rtr;
pub mod sampling;
pub mod specfn;

pub use error::{Error, Result};
pub use mixture::DiracMixture;
