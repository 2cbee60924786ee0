//! Text formats: sample-set CSV and the run configuration.
//!
//! A sample file starts with a header line
//!
//! ```text
//! #hdmr-samples d=3 m=2 weighted=1
//! 0,0,1,0.25
//! 1,0,0,0.75
//! ```
//!
//! followed by `m` rows of `d` comma-separated coordinates, plus a weight
//! column when `weighted=1`. Lines starting with `#` after the header and
//! blank lines are skipped. Floats are written in shortest round-trip form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::SimConfig;
use crate::mixture::DiracMixture;
use crate::reapprox::ReapproxConfig;
use crate::reconstruct::ReferenceDensity;

const HEADER_TAG: &str = "#hdmr-samples";
/// Rows and weight sums within this of one are renormalized.
pub const RENORM_TOL: f64 = 1e-6;

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleHeader {
    pub d: usize,
    pub m: usize,
    pub weighted: bool,
}

fn parse_header(line: &str) -> Result<SampleHeader> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(HEADER_TAG) {
        return Err(perr(1, format!("expected header starting with `{HEADER_TAG}`")));
    }
    let (mut d, mut m, mut weighted) = (None, None, None);
    for kv in parts {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| perr(1, format!("malformed header field `{kv}`")))?;
        let n: usize = v
            .parse()
            .map_err(|_| perr(1, format!("header field `{k}` is not a nonnegative integer")))?;
        match k {
            "d" => d = Some(n),
            "m" => m = Some(n),
            "weighted" if n <= 1 => weighted = Some(n == 1),
            "weighted" => return Err(perr(1, "header field `weighted` must be 0 or 1")),
            _ => return Err(perr(1, format!("unknown header field `{k}`"))),
        }
    }
    let d = d.ok_or_else(|| perr(1, "header lacks `d=`"))?;
    let m = m.ok_or_else(|| perr(1, "header lacks `m=`"))?;
    if d < 2 {
        return Err(perr(1, format!("d={d} must be at least 2")));
    }
    if m == 0 {
        return Err(perr(1, "m must be positive"));
    }
    Ok(SampleHeader {
        d,
        m,
        weighted: weighted.unwrap_or(false),
    })
}

/// Parses a sample file. Rows within [`RENORM_TOL`] of unit norm and weight
/// sums within [`RENORM_TOL`] of one are renormalized; anything further off
/// is rejected with the offending line number.
pub fn parse_samples(text: &str) -> Result<DiracMixture> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let header = match lines.next() {
        Some((_, l)) => parse_header(l)?,
        None => return Err(perr(1, "empty file")),
    };
    let cols = header.d + usize::from(header.weighted);
    let mut pts = DMatrix::zeros(header.d, header.m);
    let mut w = DVector::from_element(header.m, 1.0 / header.m as f64);
    let mut j = 0;
    let mut last_line = 1;
    for (lineno, line) in lines {
        last_line = lineno;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if j == header.m {
            return Err(perr(lineno, format!("more than m={} rows", header.m)));
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols {
            return Err(perr(lineno, format!("expected {cols} fields, found {}", fields.len())));
        }
        let mut vals = Vec::with_capacity(cols);
        for (c, f) in fields.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| perr(lineno, format!("field {} `{f}` is not a number", c + 1)))?;
            if !v.is_finite() {
                return Err(perr(lineno, format!("field {} is not finite", c + 1)));
            }
            vals.push(v);
        }
        let mut x = DVector::from_column_slice(&vals[..header.d]);
        let norm = x.norm();
        if !((norm - 1.0).abs() <= RENORM_TOL) {
            return Err(perr(lineno, format!("point has norm {norm}, expected 1")));
        }
        x /= norm;
        pts.set_column(j, &x);
        if header.weighted {
            let wj = vals[header.d];
            if wj < 0.0 {
                return Err(perr(lineno, format!("negative weight {wj}")));
            }
            w[j] = wj;
        }
        j += 1;
    }
    if j < header.m {
        return Err(perr(last_line, format!("expected m={} rows, found {j}", header.m)));
    }
    let total = w.sum();
    if !((total - 1.0).abs() <= RENORM_TOL) {
        return Err(perr(last_line, format!("weights sum to {total}, expected 1")));
    }
    DiracMixture::new(pts, w / total)
}

/// Serializes a mixture; weights are written only when `weighted` is set.
pub fn write_samples(mix: &DiracMixture, weighted: bool) -> String {
    let mut out = format!(
        "{HEADER_TAG} d={} m={} weighted={}\n",
        mix.dim(),
        mix.len(),
        u8::from(weighted)
    );
    for j in 0..mix.len() {
        let row: Vec<String> = mix.point(j).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        if weighted {
            out.push_str(&format!(",{}", mix.weights()[j]));
        }
        out.push('\n');
    }
    out
}

/// Settings for reconstruction beyond the reapproximation itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructSettings {
    /// Density to compare against; the Hellinger distance is omitted if unset.
    pub reference: Option<ReferenceDensity>,
    pub hellinger_lattice: usize,
}

impl Default for ReconstructSettings {
    fn default() -> Self {
        Self {
            reference: None,
            hellinger_lattice: 100_000,
        }
    }
}

/// Run configuration file. Every section and key is optional; unknown keys
/// are errors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the seeds of every section when set.
    pub seed: Option<u64>,
    pub reapprox: ReapproxConfig,
    pub reconstruct: ReconstructSettings,
    pub sim: SimConfig,
}

impl RunConfig {
    /// Pushes the top-level seed into the sections.
    pub fn resolve_seed(&mut self) {
        if let Some(s) = self.seed {
            self.reapprox.seed = s;
            self.sim.seed = s;
        }
    }

    /// Every validation problem, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = self.reapprox.validate();
        errs.extend(self.sim.validate());
        if let Some(r) = &self.reconstruct.reference {
            if let Err(e) = r.resolve() {
                errs.push(format!("reconstruct.reference: {e}"));
            }
        }
        if self.reconstruct.hellinger_lattice == 0 {
            errs.push("reconstruct.hellinger_lattice must be positive".into());
        }
        errs
    }
}
