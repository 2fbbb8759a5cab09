//! Grid containers, index conventions and on-disk formats.
//!
//! Every grid is `rows × cols`, row-major. Index arithmetic is modulo the
//! grid shape: the canonical index set is `{0..m-1} × {0..n-1}` and negative
//! offsets wrap.

mod mct;
mod pgm;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub use mct::{
    read_sample_file, read_spectral_file, write_sample_file, write_spectral_file, HEADER_LEN,
    MAGIC_REAL, MAGIC_SPECTRAL,
};
pub use pgm::{read_pgm, write_pgm};

fn check_shape(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::Shape(format!("grid must be at least 1x1, got {rows}x{cols}")));
    }
    if rows.checked_mul(cols) != Some(len) {
        return Err(Error::Shape(format!(
            "{rows}x{cols} grid needs {} values, got {len}",
            rows.saturating_mul(cols)
        )));
    }
    Ok(())
}

/// Real-valued `m×n` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RealGrid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealGrid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(rows, cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "grid must be at least 1x1");
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "grid must be at least 1x1");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Unit impulse at `(row, col)`, reduced modulo the shape.
    pub fn delta(rows: usize, cols: usize, row: isize, col: isize) -> Self {
        let at = GridIndex::reduce(row, col, rows, cols);
        let mut g = Self::zeros(rows, cols);
        g[(at.row, at.col)] = 1.0;
        g
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Value at `(i, j)` with both indices reduced modulo the shape.
    pub fn at_wrapped(&self, i: isize, j: isize) -> f64 {
        let idx = GridIndex::reduce(i, j, self.rows, self.cols);
        self.data[idx.row * self.cols + idx.col]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn ensure_same_shape(&self, other: &RealGrid) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &RealGrid) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
    }

    /// Elementwise `self + scale * other`.
    pub fn add_scaled(&self, other: &RealGrid, scale: f64) -> Result<Self> {
        self.ensure_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + scale * b)
                .collect(),
        })
    }

    /// Smallest row-major index holding the maximum value.
    pub fn argmax(&self) -> GridIndex {
        let mut best = 0;
        for (k, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = k;
            }
        }
        GridIndex {
            row: best / self.cols,
            col: best % self.cols,
        }
    }
}

impl std::ops::Index<(usize, usize)> for RealGrid {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RealGrid {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        &mut self.data[i * self.cols + j]
    }
}

/// Complex-valued `m×n` grid, typically a DFT.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl SpectralGrid {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        check_shape(rows, cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "grid must be at least 1x1");
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_real(g: &RealGrid) -> Self {
        Self {
            rows: g.rows,
            cols: g.cols,
            data: g.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn max_abs_diff(&self, other: &SpectralGrid) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm())))
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.im.abs()))
    }

    pub fn max_abs_real(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.re.abs()))
    }

    /// `max |G[-p,-q] - conj(G[p,q])|`; zero for spectra of real grids.
    pub fn hermitian_residue(&self) -> f64 {
        let (m, n) = self.shape();
        let mut worst = 0.0f64;
        for p in 0..m {
            for q in 0..n {
                let mirror = GridIndex::new(p, q).neg(m, n);
                let a = self.data[mirror.row * n + mirror.col];
                let b = self.data[p * n + q].conj();
                worst = worst.max((a - b).norm());
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for SpectralGrid {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SpectralGrid {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        &mut self.data[i * self.cols + j]
    }
}

/// One sample `x_k`: `d ≥ 1` feature channels of identical shape.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiChannelSample {
    channels: Vec<RealGrid>,
}

impl MultiChannelSample {
    pub fn new(channels: Vec<RealGrid>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::Shape("sample needs at least one channel".into()))?;
        for (l, ch) in channels.iter().enumerate().skip(1) {
            if ch.shape() != first.shape() {
                return Err(Error::Shape(format!(
                    "channel {l} is {}x{}, channel 0 is {}x{}",
                    ch.rows(),
                    ch.cols(),
                    first.rows(),
                    first.cols()
                )));
            }
        }
        Ok(Self { channels })
    }

    pub fn single(channel: RealGrid) -> Self {
        Self {
            channels: vec![channel],
        }
    }

    pub fn zeros(d: usize, rows: usize, cols: usize) -> Self {
        assert!(d > 0, "sample needs at least one channel");
        Self {
            channels: vec![RealGrid::zeros(rows, cols); d],
        }
    }

    pub fn channels(&self) -> &[RealGrid] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<RealGrid> {
        self.channels
    }

    pub fn depth(&self) -> usize {
        self.channels.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.channels[0].shape()
    }

    /// Number of spatial positions `N = m·n`.
    pub fn area(&self) -> usize {
        let (m, n) = self.shape();
        m * n
    }

    pub fn flip(&self) -> Self {
        Self {
            channels: self.channels.iter().map(flip).collect(),
        }
    }
}

/// A multi-channel filter in either domain.
#[derive(Clone, Debug, PartialEq)]
pub enum FilterBank {
    Spatial(Vec<RealGrid>),
    Spectral(Vec<SpectralGrid>),
}

impl FilterBank {
    pub fn depth(&self) -> usize {
        match self {
            FilterBank::Spatial(c) => c.len(),
            FilterBank::Spectral(c) => c.len(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            FilterBank::Spatial(c) => c[0].shape(),
            FilterBank::Spectral(c) => c[0].shape(),
        }
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self, FilterBank::Spectral(_))
    }

    pub fn spatial(&self) -> Result<&[RealGrid]> {
        match self {
            FilterBank::Spatial(c) => Ok(c),
            FilterBank::Spectral(_) => Err(Error::InvalidParameter(
                "expected a spatial filter bank".into(),
            )),
        }
    }

    pub fn spectral(&self) -> Result<&[SpectralGrid]> {
        match self {
            FilterBank::Spectral(c) => Ok(c),
            FilterBank::Spatial(_) => Err(Error::InvalidParameter(
                "expected a spectral filter bank".into(),
            )),
        }
    }

    /// Spatial channels packed as a sample, for writing to MCT1.
    pub fn to_sample(&self) -> Result<MultiChannelSample> {
        MultiChannelSample::new(self.spatial()?.to_vec())
    }
}

/// Canonical grid coordinate in `{0..m-1} × {0..n-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct GridIndex {
    pub row: usize,
    pub col: usize,
}

impl GridIndex {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Reduce an arbitrary integer coordinate modulo `(m, n)`.
    pub fn reduce(i: isize, j: isize, m: usize, n: usize) -> Self {
        Self {
            row: i.rem_euclid(m as isize) as usize,
            col: j.rem_euclid(n as isize) as usize,
        }
    }

    /// `(-i, -j)` reduced modulo `(m, n)`.
    pub fn neg(self, m: usize, n: usize) -> Self {
        Self::reduce(-(self.row as isize), -(self.col as isize), m, n)
    }

    /// Signed offset from the origin: indices past the half-way point wrap negative.
    pub fn displacement(self, m: usize, n: usize) -> (isize, isize) {
        let wrap = |v: usize, len: usize| {
            if v <= len / 2 {
                v as isize
            } else {
                v as isize - len as isize
            }
        };
        (wrap(self.row, m), wrap(self.col, n))
    }

    /// Euclidean distance to the origin on the torus.
    pub fn circular_distance(self, m: usize, n: usize) -> f64 {
        let di = self.row.min(m - self.row) as f64;
        let dj = self.col.min(n - self.col) as f64;
        (di * di + dj * dj).sqrt()
    }
}

/// Point reflection through the origin: `out[i,j] = g[-i mod m, -j mod n]`.
pub fn flip(g: &RealGrid) -> RealGrid {
    let (m, n) = g.shape();
    RealGrid::from_fn(m, n, |i, j| g[((m - i) % m, (n - j) % n)])
}

/// `max |g - flip(g)|`; zero exactly for centrosymmetric grids.
pub fn centrosymmetry_residue(g: &RealGrid) -> f64 {
    let (m, n) = g.shape();
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..n {
            worst = worst.max((g[(i, j)] - g[((m - i) % m, (n - j) % n)]).abs());
        }
    }
    worst
}
