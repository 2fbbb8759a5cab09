//! Ideal response labels: a Gaussian peaked at the canonical origin.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::dft2;
use crate::tensorio::{centrosymmetry_residue, RealGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelSpec {
    pub rows: usize,
    pub cols: usize,
    pub sigma: f64,
}

impl LabelSpec {
    pub fn new(rows: usize, cols: usize, sigma: f64) -> Self {
        Self { rows, cols, sigma }
    }

    /// Bandwidth `sqrt(m·n)/16`, the tracker default.
    pub fn with_default_sigma(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, default_sigma(rows, cols))
    }
}

pub fn default_sigma(rows: usize, cols: usize) -> f64 {
    ((rows * cols) as f64).sqrt() / 16.0
}

/// Distance from `i` to 0 on a ring of length `len`.
fn ring_distance(i: usize, len: usize) -> f64 {
    i.min(len - i) as f64
}

/// `y[i,j] = exp(-(δ_m(i)² + δ_n(j)²) / 2σ²)` with circular distances, so
/// `y` equals its own point reflection bit for bit.
pub fn gaussian_label(spec: &LabelSpec) -> Result<RealGrid> {
    if !(spec.sigma > 0.0) || !spec.sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive and finite, got {}",
            spec.sigma
        )));
    }
    if spec.rows == 0 || spec.cols == 0 {
        return Err(Error::Shape("label grid must be at least 1x1".into()));
    }
    let denom = 2.0 * spec.sigma * spec.sigma;
    Ok(RealGrid::from_fn(spec.rows, spec.cols, |i, j| {
        let di = ring_distance(i, spec.rows);
        let dj = ring_distance(j, spec.cols);
        (-(di * di + dj * dj) / denom).exp()
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LabelReport {
    pub centrosymmetry_residue: f64,
    pub spectrum_real_residue: f64,
    pub spectrum_min: f64,
    pub centrosymmetric: bool,
    pub passed: bool,
}

/// Check that `y` is centrosymmetric and has a real spectrum.
pub fn validate_label(y: &RealGrid, tol: f64) -> LabelReport {
    let sym = centrosymmetry_residue(y);
    let spec = dft2(y);
    let imag = spec.max_abs_imag();
    let min = spec
        .as_slice()
        .iter()
        .map(|v| v.re)
        .fold(f64::INFINITY, f64::min);
    LabelReport {
        centrosymmetry_residue: sym,
        spectrum_real_residue: imag,
        spectrum_min: min,
        centrosymmetric: sym <= tol,
        passed: sym <= tol && imag <= tol,
    }
}
