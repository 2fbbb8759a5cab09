//! 2-D DFTs and the circular correlation / convolution operators.
//!
//! Forward transforms are unnormalized, inverse transforms carry `1/(m·n)`.
//! Correlation is oriented so that its spectrum is `conj(x̂)·f̂`:
//!
//! ```text
//! (x ⊚ f)[u,v] = Σ x[i,j] · f[i+u, j+v]
//! (x ⊛ f)[u,v] = Σ x[i,j] · f[u-i, v-j]
//! ```

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensorio::{FilterBank, MultiChannelSample, RealGrid, SpectralGrid};

/// Which operator relates a sample to its response.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Correlation,
    Convolution,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Correlation => "correlation",
            Mode::Convolution => "convolution",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlation" | "corr" => Ok(Mode::Correlation),
            "convolution" | "conv" => Ok(Mode::Convolution),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

/// Precomputed row and column FFTs for one grid shape.
#[derive(Clone)]
pub struct TransformPlan {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TransformPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformPlan")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl TransformPlan {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "grid must be at least 1x1");
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn check(&self, shape: (usize, usize)) -> Result<()> {
        if shape != (self.rows, self.cols) {
            return Err(Error::Shape(format!(
                "plan is {}x{}, grid is {}x{}",
                self.rows, self.cols, shape.0, shape.1
            )));
        }
        Ok(())
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let (m, n) = (self.rows, self.cols);
        let (row_fft, col_fft) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        let mut scratch = vec![
            Complex64::new(0.0, 0.0);
            row_fft
                .get_inplace_scratch_len()
                .max(col_fft.get_inplace_scratch_len())
        ];
        for row in data.chunks_exact_mut(n) {
            row_fft.process_with_scratch(row, &mut scratch);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..n {
            for i in 0..m {
                column[i] = data[i * n + j];
            }
            col_fft.process_with_scratch(&mut column, &mut scratch);
            for i in 0..m {
                data[i * n + j] = column[i];
            }
        }
        if inverse {
            let scale = 1.0 / (m * n) as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    pub fn forward(&self, g: &RealGrid) -> Result<SpectralGrid> {
        self.check(g.shape())?;
        let mut out = SpectralGrid::from_real(g);
        self.transform(out.as_mut_slice(), false);
        Ok(out)
    }

    pub fn forward_complex(&self, g: &SpectralGrid) -> Result<SpectralGrid> {
        self.check(g.shape())?;
        let mut out = g.clone();
        self.transform(out.as_mut_slice(), false);
        Ok(out)
    }

    pub fn inverse(&self, g: &SpectralGrid) -> Result<SpectralGrid> {
        self.check(g.shape())?;
        let mut out = g.clone();
        self.transform(out.as_mut_slice(), true);
        Ok(out)
    }
}

/// Unnormalized forward 2-D DFT of a real grid.
pub fn dft2(g: &RealGrid) -> SpectralGrid {
    let (m, n) = g.shape();
    TransformPlan::new(m, n).forward(g).expect("plan matches grid")
}

/// Inverse 2-D DFT, scaled by `1/(m·n)`.
pub fn idft2(g: &SpectralGrid) -> SpectralGrid {
    let (m, n) = g.shape();
    TransformPlan::new(m, n).inverse(g).expect("plan matches grid")
}

/// Real part of `g`, provided `max |imag| ≤ tol·(1 + max |real|)`.
pub fn take_real(g: &SpectralGrid, tol: f64) -> Result<RealGrid> {
    let residue = g.max_abs_imag();
    let bound = tol * (1.0 + g.max_abs_real());
    if !(residue <= bound) {
        return Err(Error::ImaginaryResidue { residue, bound });
    }
    RealGrid::new(
        g.rows(),
        g.cols(),
        g.as_slice().iter().map(|v| v.re).collect(),
    )
}

// Inverse transforms of products of real-signal spectra are real up to
// rounding; this bound is far above FFT noise for desk-sized grids.
const REAL_TOL: f64 = 1e-9;

fn product_spectrum(xh: &SpectralGrid, fh: &SpectralGrid, mode: Mode) -> Vec<Complex64> {
    xh.as_slice()
        .iter()
        .zip(fh.as_slice())
        .map(|(x, f)| match mode {
            Mode::Correlation => x.conj() * f,
            Mode::Convolution => x * f,
        })
        .collect()
}

fn apply(x: &RealGrid, f: &RealGrid, mode: Mode) -> Result<RealGrid> {
    x.ensure_same_shape(f)?;
    let (m, n) = x.shape();
    let plan = TransformPlan::new(m, n);
    let prod = product_spectrum(&plan.forward(x)?, &plan.forward(f)?, mode);
    take_real(&plan.inverse(&SpectralGrid::new(m, n, prod)?)?, REAL_TOL)
}

/// `out[u,v] = Σ x[i,j]·f[(i+u) mod m, (j+v) mod n]`.
pub fn circ_correlate(x: &RealGrid, f: &RealGrid) -> Result<RealGrid> {
    apply(x, f, Mode::Correlation)
}

/// `out[u,v] = Σ x[i,j]·f[(u-i) mod m, (v-j) mod n]`.
pub fn circ_convolve(x: &RealGrid, f: &RealGrid) -> Result<RealGrid> {
    apply(x, f, Mode::Convolution)
}

fn check_bank(sample: &MultiChannelSample, depth: usize, shape: (usize, usize)) -> Result<()> {
    if sample.depth() != depth {
        return Err(Error::Shape(format!(
            "sample has {} channels, filter has {depth}",
            sample.depth()
        )));
    }
    if sample.shape() != shape {
        return Err(Error::Shape(format!(
            "sample is {:?}, filter is {shape:?}",
            sample.shape()
        )));
    }
    Ok(())
}

/// Spectrum of the multi-channel response: `Σ_l op(x̂^l)·f̂^l`.
pub fn response_spectrum(
    plan: &TransformPlan,
    sample: &MultiChannelSample,
    filter: &[SpectralGrid],
    mode: Mode,
) -> Result<SpectralGrid> {
    check_bank(sample, filter.len(), filter[0].shape())?;
    let (m, n) = sample.shape();
    let mut acc = vec![Complex64::new(0.0, 0.0); m * n];
    for (x, fh) in sample.channels().iter().zip(filter) {
        let xh = plan.forward(x)?;
        for (a, p) in acc.iter_mut().zip(product_spectrum(&xh, fh, mode)) {
            *a += p;
        }
    }
    SpectralGrid::new(m, n, acc)
}

/// Channel-wise correlation (or convolution) summed over channels.
pub fn response(sample: &MultiChannelSample, filter: &FilterBank, mode: Mode) -> Result<RealGrid> {
    if filter.depth() == 0 {
        return Err(Error::Shape("empty filter bank".into()));
    }
    check_bank(sample, filter.depth(), filter.shape())?;
    let (m, n) = sample.shape();
    let plan = TransformPlan::new(m, n);
    let spectra;
    let fh = match filter {
        FilterBank::Spectral(c) => c.as_slice(),
        FilterBank::Spatial(c) => {
            spectra = c
                .iter()
                .map(|g| plan.forward(g))
                .collect::<Result<Vec<_>>>()?;
            spectra.as_slice()
        }
    };
    let spec = response_spectrum(&plan, sample, fh, mode)?;
    take_real(&plan.inverse(&spec)?, REAL_TOL)
}
