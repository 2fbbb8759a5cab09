//! Single-scale online tracker built on the per-bin solver.
//!
//! The model keeps running per-bin statistics instead of a sample history:
//! every update blends in the newest sample with weight `η`, which realizes
//! geometric sample weights `α_k ∝ η(1−η)^{t−k}`. The filter is re-solved from
//! those statistics at every frame.
//!
//! Coordinates are continuous pixels: pixel `(r, c)` covers
//! `[c, c+1) × [r, r+1)`, so a box `(x, y, w, h)` has center `(x + w/2, y + h/2)`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::labels::{default_sigma, gaussian_label, LabelSpec};
use crate::random::rng;
use crate::solver::{accumulate_bin, bins_to_bank, solve_hermitian, DEFAULT_LAMBDA};
use crate::spectral::{response_spectrum, take_real, Mode, TransformPlan};
use crate::tensorio::{FilterBank, GridIndex, MultiChannelSample, RealGrid, SpectralGrid};

pub const MODEL_SIZE: usize = 64;
const MIN_BOX: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureSet {
    Gray,
    /// Grayscale plus horizontal and vertical central differences.
    GrayGradients,
}

impl FeatureSet {
    pub fn depth(self) -> usize {
        match self {
            FeatureSet::Gray => 1,
            FeatureSet::GrayGradients => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerConfig {
    pub mode: Mode,
    /// Patch side relative to the target box.
    pub patch_scale: f64,
    pub lambda: f64,
    /// Learning rate `η ∈ (0, 1]`.
    pub eta: f64,
    /// Label bandwidth in model cells; `None` uses `sqrt(m·n)/16`.
    pub sigma: Option<f64>,
    pub features: FeatureSet,
    pub hann: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Correlation,
            patch_scale: 2.0,
            lambda: DEFAULT_LAMBDA,
            eta: 0.025,
            sigma: None,
            features: FeatureSet::Gray,
            hann: true,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!("eta must be in (0, 1], got {}", self.eta)));
        }
        if !(self.patch_scale >= 1.0) || !self.patch_scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "patch scale must be >= 1, got {}",
                self.patch_scale
            )));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return Err(Error::InvalidParameter(format!("sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
            .unwrap_or_else(|| default_sigma(MODEL_SIZE, MODEL_SIZE))
    }
}

/// Axis-aligned box: top-left corner and size, in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }
}

impl std::str::FromStr for BoundingBox {
    type Err = Error;

    /// Parses `"x,y,w,h"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParameter(format!("bad box {s:?}: {e}")))?;
        match parts[..] {
            [x, y, w, h] if parts.iter().all(|v| v.is_finite()) => Ok(Self::new(x, y, w, h)),
            _ => Err(Error::InvalidParameter(format!("box must be \"x,y,w,h\", got {s:?}"))),
        }
    }
}

/// Symmetric Hann taper of length `len`; both endpoints are zero.
pub fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Crop a `box × scale` patch around `center`, resample it to the model grid
/// and build the configured feature channels.
pub fn extract_features(
    frame: &RealGrid,
    center: (f64, f64),
    size: (f64, f64),
    config: &TrackerConfig,
) -> Result<MultiChannelSample> {
    let (fh, fw) = (frame.rows() as f64, frame.cols() as f64);
    let pw = size.0 * config.patch_scale;
    let ph = size.1 * config.patch_scale;
    let (x0, y0) = (center.0 - pw / 2.0, center.1 - ph / 2.0);
    if x0 >= fw || y0 >= fh || x0 + pw <= 0.0 || y0 + ph <= 0.0 || !(x0.is_finite() && y0.is_finite()) {
        return Err(Error::TrackingLost(format!(
            "patch at ({:.1},{:.1}) does not overlap the {}x{} frame",
            center.0,
            center.1,
            frame.cols(),
            frame.rows()
        )));
    }
    let m = MODEL_SIZE;
    let sample_at = |start: f64, extent: f64, k: usize, limit: usize| {
        let pos = start + (k as f64 + 0.5) * extent / m as f64;
        (pos.floor().max(0.0) as usize).min(limit - 1)
    };
    let rows: Vec<usize> = (0..m).map(|r| sample_at(y0, ph, r, frame.rows())).collect();
    let cols: Vec<usize> = (0..m).map(|c| sample_at(x0, pw, c, frame.cols())).collect();
    let patch = RealGrid::from_fn(m, m, |r, c| frame[(rows[r], cols[c])]);

    let mean = patch.sum() / (m * m) as f64;
    let mut channels = vec![patch.map(|v| v - mean)];
    if config.features == FeatureSet::GrayGradients {
        let at = |r: isize, c: isize| {
            patch[(r.clamp(0, m as isize - 1) as usize, c.clamp(0, m as isize - 1) as usize)]
        };
        channels.push(RealGrid::from_fn(m, m, |r, c| {
            let (r, c) = (r as isize, c as isize);
            0.5 * (at(r, c + 1) - at(r, c - 1))
        }));
        channels.push(RealGrid::from_fn(m, m, |r, c| {
            let (r, c) = (r as isize, c as isize);
            0.5 * (at(r + 1, c) - at(r - 1, c))
        }));
    }
    if config.hann {
        let w = hann(m);
        for ch in channels.iter_mut() {
            for r in 0..m {
                for c in 0..m {
                    ch[(r, c)] *= w[r] * w[c];
                }
            }
        }
    }
    MultiChannelSample::new(channels)
}

/// Running model of one tracked target.
#[derive(Clone, Debug)]
pub struct TrackState {
    config: TrackerConfig,
    plan: TransformPlan,
    label_spectrum: SpectralGrid,
    /// Per bin, row-major `d×d`: `Σ α_k conj(u_k) u_kᵀ`.
    gram: Vec<Complex64>,
    /// Per bin, `d` values: `Σ α_k conj(u_k) ŷ`.
    numerators: Vec<Complex64>,
    center: (f64, f64),
    size: (f64, f64),
    frame: usize,
    init_score: f64,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub bbox: BoundingBox,
    pub score: f64,
    pub peak: GridIndex,
    /// Displacement applied to the center, in frame pixels.
    pub shift: (f64, f64),
    pub response: RealGrid,
}

impl TrackState {
    pub fn init(frame: &RealGrid, bbox: BoundingBox, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        if !(bbox.w >= MIN_BOX && bbox.h >= MIN_BOX) {
            return Err(Error::InvalidParameter(format!(
                "box {}x{} is smaller than {MIN_BOX}x{MIN_BOX}",
                bbox.w, bbox.h
            )));
        }
        let (fw, fh) = (frame.cols() as f64, frame.rows() as f64);
        if bbox.x < 0.0 || bbox.y < 0.0 || bbox.x + bbox.w > fw || bbox.y + bbox.h > fh {
            return Err(Error::InvalidParameter(format!(
                "box ({},{},{},{}) is not inside the {}x{} frame",
                bbox.x, bbox.y, bbox.w, bbox.h, frame.cols(), frame.rows()
            )));
        }
        let plan = TransformPlan::new(MODEL_SIZE, MODEL_SIZE);
        let label = gaussian_label(&LabelSpec::new(MODEL_SIZE, MODEL_SIZE, config.sigma()))?;
        let label_spectrum = plan.forward(&label)?;
        let d = config.features.depth();
        let bins = MODEL_SIZE * MODEL_SIZE;
        let mut state = Self {
            plan,
            label_spectrum,
            gram: vec![Complex64::new(0.0, 0.0); bins * d * d],
            numerators: vec![Complex64::new(0.0, 0.0); bins * d],
            center: bbox.center(),
            size: (bbox.w, bbox.h),
            frame: 0,
            init_score: 0.0,
            config,
        };
        let x = extract_features(frame, state.center, state.size, &state.config)?;
        state.fold(&x, 1.0)?;
        state.init_score = state.detect(&x)?.1;
        Ok(state)
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::from_center(self.center.0, self.center.1, self.size.0, self.size.1)
    }

    pub fn frame_index(&self) -> usize {
        self.frame
    }

    /// Peak response of the initial model on its own training patch.
    pub fn init_score(&self) -> f64 {
        self.init_score
    }

    pub fn gram(&self) -> &[Complex64] {
        &self.gram
    }

    pub fn numerators(&self) -> &[Complex64] {
        &self.numerators
    }

    /// `max |G − Gᴴ|` over every bin accumulator.
    pub fn gram_hermitian_residue(&self) -> f64 {
        let d = self.config.features.depth();
        let mut worst = 0.0f64;
        for g in self.gram.chunks_exact(d * d) {
            for i in 0..d {
                for j in 0..d {
                    worst = worst.max((g[i * d + j] - g[j * d + i].conj()).norm());
                }
            }
        }
        worst
    }

    /// Blend `x` into the statistics: `S ← (1−w)·S + w·S(x)`.
    fn fold(&mut self, x: &MultiChannelSample, weight: f64) -> Result<()> {
        let d = self.config.features.depth();
        let spectra = x
            .channels()
            .iter()
            .map(|c| self.plan.forward(c))
            .collect::<Result<Vec<_>>>()?;
        if weight < 1.0 {
            let keep = 1.0 - weight;
            self.gram.iter_mut().for_each(|v| *v *= keep);
            self.numerators.iter_mut().for_each(|v| *v *= keep);
        } else {
            self.gram.fill(Complex64::new(0.0, 0.0));
            self.numerators.fill(Complex64::new(0.0, 0.0));
        }
        let mut u = vec![Complex64::new(0.0, 0.0); d];
        for (idx, (gram, rhs)) in self
            .gram
            .chunks_exact_mut(d * d)
            .zip(self.numerators.chunks_exact_mut(d))
            .enumerate()
        {
            for (ul, s) in u.iter_mut().zip(&spectra) {
                let v = s.as_slice()[idx];
                *ul = match self.config.mode {
                    Mode::Correlation => v.conj(),
                    Mode::Convolution => v,
                };
            }
            accumulate_bin(gram, rhs, &u, self.label_spectrum.as_slice()[idx], weight);
        }
        Ok(())
    }

    /// Solve every bin of the accumulated system `(G + λI) f̂ = b`.
    pub fn current_filter(&self) -> Result<FilterBank> {
        let d = self.config.features.depth();
        let bins = self
            .gram
            .chunks_exact(d * d)
            .zip(self.numerators.chunks_exact(d))
            .enumerate()
            .map(|(idx, (g, b))| {
                let mut a = g.to_vec();
                for i in 0..d {
                    a[i * d + i] += self.config.lambda;
                }
                solve_hermitian(&a, b).ok_or(Error::NotPositiveDefinite {
                    row: idx / MODEL_SIZE,
                    col: idx % MODEL_SIZE,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(bins_to_bank(MODEL_SIZE, MODEL_SIZE, d, &bins))
    }

    fn detect(&self, x: &MultiChannelSample) -> Result<(RealGrid, f64, GridIndex)> {
        let filter = self.current_filter()?;
        let spec = response_spectrum(&self.plan, x, filter.spectral()?, self.config.mode)?;
        let response = take_real(&self.plan.inverse(&spec)?, 1e-9)?;
        let peak = response.argmax();
        let score = response[(peak.row, peak.col)];
        Ok((response, score, peak))
    }

    /// Model-grid peak → target displacement in model cells. A correlation
    /// peak sits at minus the target motion; a convolution peak at plus.
    fn decode(&self, peak: GridIndex) -> (f64, f64) {
        let (dr, dc) = peak.displacement(MODEL_SIZE, MODEL_SIZE);
        let sign = match self.config.mode {
            Mode::Correlation => -1.0,
            Mode::Convolution => 1.0,
        };
        (sign * dc as f64, sign * dr as f64)
    }

    /// Detect in `frame`, move the center, then update the model at the new center.
    pub fn step(&mut self, frame: &RealGrid) -> Result<StepOutput> {
        let x = extract_features(frame, self.center, self.size, &self.config)?;
        let (response, score, peak) = self.detect(&x)?;
        let (dc, dr) = self.decode(peak);
        let cell_w = self.size.0 * self.config.patch_scale / MODEL_SIZE as f64;
        let cell_h = self.size.1 * self.config.patch_scale / MODEL_SIZE as f64;
        let shift = (dc * cell_w, dr * cell_h);
        self.center = (self.center.0 + shift.0, self.center.1 + shift.1);

        let x = extract_features(frame, self.center, self.size, &self.config)?;
        self.fold(&x, self.config.eta)?;
        self.frame += 1;
        Ok(StepOutput {
            bbox: self.bbox(),
            score,
            peak,
            shift,
            response,
        })
    }
}

/// One CSV row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackRecord {
    pub frame: usize,
    pub cx: f64,
    pub cy: f64,
    pub score: f64,
}

/// Track a whole sequence; record 0 is the initial box with its self-detection score.
pub fn track_sequence<'a>(
    frames: impl IntoIterator<Item = &'a RealGrid>,
    init: BoundingBox,
    config: TrackerConfig,
    mut on_step: impl FnMut(usize, &StepOutput),
) -> Result<Vec<TrackRecord>> {
    let mut frames = frames.into_iter();
    let first = frames
        .next()
        .ok_or_else(|| Error::InvalidParameter("empty frame sequence".into()))?;
    let mut state = TrackState::init(first, init, config)?;
    let (cx, cy) = state.center();
    let mut records = vec![TrackRecord {
        frame: 0,
        cx,
        cy,
        score: state.init_score(),
    }];
    for (k, frame) in frames.enumerate() {
        let out = state.step(frame)?;
        on_step(k + 1, &out);
        let (cx, cy) = out.bbox.center();
        records.push(TrackRecord {
            frame: k + 1,
            cx,
            cy,
            score: out.score,
        });
    }
    Ok(records)
}

/// `frame,cx,cy,score` with fixed precision so runs diff cleanly.
pub fn records_to_csv(records: &[TrackRecord]) -> String {
    let mut out = String::from("frame,cx,cy,score\n");
    for r in records {
        writeln!(out, "{},{:.3},{:.3},{:.6}", r.frame, r.cx, r.cy, r.score).unwrap();
    }
    out
}

/// Gaussian blob moving at constant velocity over a flat background.
#[derive(Clone, Debug, PartialEq)]
pub struct BlobSequence {
    pub rows: usize,
    pub cols: usize,
    pub frames: usize,
    pub start: (f64, f64),
    pub velocity: (f64, f64),
    pub blob_sigma: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl BlobSequence {
    /// 50 frames of 64×64, blob moving one pixel per frame to the right.
    pub fn standard(seed: u64) -> Self {
        Self {
            rows: 64,
            cols: 64,
            frames: 50,
            start: (8.0, 32.0),
            velocity: (1.0, 0.0),
            blob_sigma: 3.0,
            noise_std: 0.01,
            seed,
        }
    }

    pub fn center(&self, k: usize) -> (f64, f64) {
        (
            self.start.0 + self.velocity.0 * k as f64,
            self.start.1 + self.velocity.1 * k as f64,
        )
    }

    pub fn render(&self) -> Vec<RealGrid> {
        let mut r = rng(self.seed);
        let noise = Normal::new(0.0, self.noise_std.max(0.0)).expect("finite std");
        let denom = 2.0 * self.blob_sigma * self.blob_sigma;
        (0..self.frames)
            .map(|k| {
                let (cx, cy) = self.center(k);
                RealGrid::from_fn(self.rows, self.cols, |i, j| {
                    let dx = j as f64 + 0.5 - cx;
                    let dy = i as f64 + 0.5 - cy;
                    let v = 0.2 + 0.6 * (-(dx * dx + dy * dy) / denom).exp();
                    if self.noise_std > 0.0 {
                        v + noise.sample(&mut r)
                    } else {
                        v
                    }
                })
            })
            .collect()
    }

    /// `w×h` box centered on the blob in frame 0.
    pub fn initial_box(&self, w: f64, h: f64) -> BoundingBox {
        BoundingBox::from_center(self.start.0, self.start.1, w, h)
    }
}
