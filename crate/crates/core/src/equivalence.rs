//! Numerical checks that the correlation and convolution formulations agree.
//!
//! For real samples and a centrosymmetric label, the optimal spectral filters
//! satisfy `f̂_* = conj(f̂'_*)`, the detection responses satisfy
//! `R[i,j] = R'[-i,-j]`, and both reach the same squared error against `y`.
//! Each check here solves both modes on one seeded instance and reports the
//! raw residue; [`run_suite`] sweeps many instances.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::labels::{gaussian_label, validate_label, LabelSpec};
use crate::oracle::{normal_equation_residual, MAX_UNKNOWNS};
use crate::random::{normal_sample, rng};
use crate::solver::{filter_to_spatial, mse, solve_filter, SolveSpec};
use crate::spectral::{response, Mode};
use crate::tensorio::{flip, FilterBank, GridIndex, MultiChannelSample, RealGrid};

/// How training samples are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingKind {
    Random,
    /// `x + flip(x)`, so every spectrum is real.
    Centrosymmetric,
}

/// Which grid is used as the detection sample `x_{k'}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionKind {
    /// A fresh draw from the same generator as the training samples.
    Fresh,
    Zero,
    /// The first training sample circularly shifted by `(rows, cols)`.
    ShiftedTraining(isize, isize),
}

/// Shape of the ideal response.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Centered,
    /// Gaussian peaked at `(1, 2)`: not centrosymmetric, spectrum complex.
    OffCenter,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InstanceSpec {
    pub rows: usize,
    pub cols: usize,
    pub depth: usize,
    pub samples: usize,
    pub seed: u64,
    pub lambda: f64,
    pub sigma: f64,
    pub training: TrainingKind,
    pub detection: DetectionKind,
    pub label: LabelKind,
}

impl InstanceSpec {
    /// Random instance with a fresh detection sample and `σ = min(m,n)/8`.
    pub fn random(rows: usize, cols: usize, depth: usize, samples: usize, seed: u64, lambda: f64) -> Self {
        Self {
            rows,
            cols,
            depth,
            samples,
            seed,
            lambda,
            sigma: rows.min(cols) as f64 / 8.0,
            training: TrainingKind::Random,
            detection: DetectionKind::Fresh,
            label: LabelKind::Centered,
        }
    }

    /// Same instance with the hypothesis deliberately broken.
    pub fn negative_control(self) -> Self {
        Self {
            label: LabelKind::OffCenter,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::InvalidParameter("instance grids must be at least 2x2".into()));
        }
        if self.depth == 0 || self.samples == 0 {
            return Err(Error::InvalidParameter("instance needs d >= 1 and t >= 1".into()));
        }
        if !(self.lambda > 0.0) || !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter("lambda and sigma must be positive".into()));
        }
        Ok(())
    }

    pub fn label_grid(&self) -> Result<RealGrid> {
        let spec = LabelSpec::new(self.rows, self.cols, self.sigma);
        let centered = gaussian_label(&spec)?;
        Ok(match self.label {
            LabelKind::Centered => centered,
            LabelKind::OffCenter => RealGrid::from_fn(self.rows, self.cols, |i, j| {
                centered.at_wrapped(i as isize - 1, j as isize - 2)
            }),
        })
    }

    /// Training samples, detection sample and solve spec, fully determined by the seed.
    pub fn materialize(&self) -> Result<Instance> {
        self.validate()?;
        let mut r = rng(self.seed);
        let draw = |r: &mut _| {
            let s = normal_sample(r, self.depth, self.rows, self.cols);
            match self.training {
                TrainingKind::Random => s,
                TrainingKind::Centrosymmetric => {
                    let f = s.flip();
                    let channels = s
                        .channels()
                        .iter()
                        .zip(f.channels())
                        .map(|(a, b)| a.add_scaled(b, 1.0).expect("same shape"))
                        .collect();
                    MultiChannelSample::new(channels).expect("same shape")
                }
            }
        };
        let samples: Vec<_> = (0..self.samples).map(|_| draw(&mut r)).collect();
        let detection = match self.detection {
            DetectionKind::Fresh => draw(&mut r),
            DetectionKind::Zero => MultiChannelSample::zeros(self.depth, self.rows, self.cols),
            DetectionKind::ShiftedTraining(di, dj) => {
                let channels = samples[0]
                    .channels()
                    .iter()
                    .map(|c| {
                        RealGrid::from_fn(self.rows, self.cols, |i, j| {
                            c.at_wrapped(i as isize - di, j as isize - dj)
                        })
                    })
                    .collect();
                MultiChannelSample::new(channels)?
            }
        };
        let spec = SolveSpec::uniform(self.label_grid()?, self.samples, self.lambda, Mode::Correlation);
        Ok(Instance {
            samples,
            detection,
            spec,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub samples: Vec<MultiChannelSample>,
    pub detection: MultiChannelSample,
    /// Correlation-mode spec; use [`SolveSpec::with_mode`] for convolution.
    pub spec: SolveSpec,
}

/// Both optimal filters and both detection responses of one instance.
#[derive(Clone, Debug)]
pub struct Solved {
    pub corr_filter: FilterBank,
    pub conv_filter: FilterBank,
    pub corr_response: RealGrid,
    pub conv_response: RealGrid,
}

// Real-part extraction bound for the spatial filters. Loose on purpose: the
// negative-control label is not centrosymmetric but its filters stay real.
const SPATIAL_TOL: f64 = 1e-8;

impl Instance {
    pub fn solve(&self) -> Result<Solved> {
        let corr_filter = solve_filter(&self.samples, &self.spec.with_mode(Mode::Correlation))?;
        let conv_filter = solve_filter(&self.samples, &self.spec.with_mode(Mode::Convolution))?;
        let corr_response = response(
            &self.detection,
            &filter_to_spatial(&corr_filter, SPATIAL_TOL)?,
            Mode::Correlation,
        )?;
        let conv_response = response(
            &self.detection,
            &filter_to_spatial(&conv_filter, SPATIAL_TOL)?,
            Mode::Convolution,
        )?;
        Ok(Solved {
            corr_filter,
            conv_filter,
            corr_response,
            conv_response,
        })
    }
}

impl Solved {
    /// `max |f̂_* − conj(f̂'_*)|` over channels and bins.
    pub fn conj_residue(&self) -> Result<f64> {
        let a = self.corr_filter.spectral()?;
        let b = self.conv_filter.spectral()?;
        a.iter()
            .zip(b)
            .try_fold(0.0f64, |acc, (x, y)| Ok(acc.max(x.max_abs_diff(&y.conj())?)))
    }

    /// `max |R − flip(R')|`.
    pub fn flip_residue(&self) -> Result<f64> {
        self.corr_response.max_abs_diff(&flip(&self.conv_response))
    }
}

pub fn check_conjugation(instance: &InstanceSpec) -> Result<f64> {
    instance.materialize()?.solve()?.conj_residue()
}

pub fn check_flip_symmetry(instance: &InstanceSpec) -> Result<f64> {
    instance.materialize()?.solve()?.flip_residue()
}

fn mse_pair(inst: &Instance, solved: &Solved) -> Result<(f64, f64)> {
    Ok((
        mse(&solved.corr_response, &inst.spec.label)?,
        mse(&solved.conv_response, &inst.spec.label)?,
    ))
}

fn relative_gap(corr: f64, conv: f64) -> f64 {
    (corr - conv).abs() / (1.0 + corr)
}

/// `|mse(R,y) − mse(R',y)| / (1 + mse(R,y))`.
pub fn check_mse_equality(instance: &InstanceSpec) -> Result<f64> {
    let inst = instance.materialize()?;
    let solved = inst.solve()?;
    let (a, b) = mse_pair(&inst, &solved)?;
    Ok(relative_gap(a, b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakOutcome {
    Mirrored,
    NotMirrored,
    /// At least one response has several bins within tie tolerance of its maximum.
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeakCheck {
    pub outcome: PeakOutcome,
    pub peak_corr: GridIndex,
    pub peak_conv: GridIndex,
    pub distance_corr: f64,
    pub distance_conv: f64,
}

impl PeakCheck {
    pub fn mirrored(&self) -> bool {
        self.outcome == PeakOutcome::Mirrored
    }
}

const TIE_TOL: f64 = 1e-12;

fn unique_peak(g: &RealGrid) -> Option<GridIndex> {
    let top = g.argmax();
    let max = g[(top.row, top.col)];
    let close = g
        .as_slice()
        .iter()
        .filter(|&&v| max - v <= TIE_TOL * max.abs().max(1.0))
        .count();
    (close == 1).then_some(top)
}

pub fn peak_mirror(corr: &RealGrid, conv: &RealGrid) -> PeakCheck {
    let (m, n) = corr.shape();
    let peak_corr = corr.argmax();
    let peak_conv = conv.argmax();
    let outcome = match (unique_peak(corr), unique_peak(conv)) {
        (Some(a), Some(b)) if a == b.neg(m, n) => PeakOutcome::Mirrored,
        (Some(_), Some(_)) => PeakOutcome::NotMirrored,
        _ => PeakOutcome::Inconclusive,
    };
    PeakCheck {
        outcome,
        peak_corr,
        peak_conv,
        distance_corr: peak_corr.circular_distance(m, n),
        distance_conv: peak_conv.circular_distance(m, n),
    }
}

pub fn check_peak_mirror(instance: &InstanceSpec) -> Result<PeakCheck> {
    let solved = instance.materialize()?.solve()?;
    Ok(peak_mirror(&solved.corr_response, &solved.conv_response))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub conj: f64,
    pub flip: f64,
    pub mse: f64,
    pub normal: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            conj: 1e-9,
            flip: 1e-9,
            mse: 1e-10,
            normal: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub instance: InstanceSpec,
    pub conj_residue: f64,
    pub flip_residue: f64,
    pub mse_corr: f64,
    pub mse_conv: f64,
    pub mse_gap: f64,
    pub peak: PeakCheck,
    pub label_centrosymmetry_residue: f64,
    pub label_spectrum_imag: f64,
    /// `max residual / (1 + ‖rhs‖)` over both modes; `None` when `N·d` is too large to densify.
    pub normal_residual: Option<f64>,
    pub error: Option<String>,
    pub passed: bool,
}

/// Largest `N·d` for which the dense normal-equation residual is evaluated.
pub const NORMAL_CHECK_LIMIT: usize = 1024;

pub fn evaluate(spec: &InstanceSpec, tol: &Tolerances) -> EquivalenceReport {
    match try_evaluate(spec, tol) {
        Ok(r) => r,
        Err(e) => EquivalenceReport {
            instance: *spec,
            conj_residue: f64::NAN,
            flip_residue: f64::NAN,
            mse_corr: f64::NAN,
            mse_conv: f64::NAN,
            mse_gap: f64::NAN,
            peak: PeakCheck {
                outcome: PeakOutcome::Inconclusive,
                peak_corr: GridIndex::new(0, 0),
                peak_conv: GridIndex::new(0, 0),
                distance_corr: f64::NAN,
                distance_conv: f64::NAN,
            },
            label_centrosymmetry_residue: f64::NAN,
            label_spectrum_imag: f64::NAN,
            normal_residual: None,
            error: Some(e.to_string()),
            passed: false,
        },
    }
}

fn try_evaluate(spec: &InstanceSpec, tol: &Tolerances) -> Result<EquivalenceReport> {
    let inst = spec.materialize()?;
    let solved = inst.solve()?;
    let conj_residue = solved.conj_residue()?;
    let flip_residue = solved.flip_residue()?;
    let (mse_corr, mse_conv) = mse_pair(&inst, &solved)?;
    let mse_gap = relative_gap(mse_corr, mse_conv);
    let label = validate_label(&inst.spec.label, 0.0);

    let normal_residual = if spec.rows * spec.cols * spec.depth <= NORMAL_CHECK_LIMIT.min(MAX_UNKNOWNS) {
        let mut worst = 0.0f64;
        for (mode, f) in [
            (Mode::Correlation, &solved.corr_filter),
            (Mode::Convolution, &solved.conv_filter),
        ] {
            let r = normal_equation_residual(&inst.samples, &inst.spec.with_mode(mode), f)?;
            worst = worst.max(r.residual / (1.0 + r.rhs_norm));
        }
        Some(worst)
    } else {
        None
    };

    let passed = conj_residue <= tol.conj
        && flip_residue <= tol.flip
        && mse_gap <= tol.mse
        && normal_residual.map_or(true, |r| r <= tol.normal);
    Ok(EquivalenceReport {
        instance: *spec,
        conj_residue,
        flip_residue,
        mse_corr,
        mse_conv,
        mse_gap,
        peak: peak_mirror(&solved.corr_response, &solved.conv_response),
        label_centrosymmetry_residue: label.centrosymmetry_residue,
        label_spectrum_imag: label.spectrum_real_residue,
        normal_residual,
        error: None,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteSummary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub max_conj_residue: f64,
    pub max_flip_residue: f64,
    pub max_mse_gap: f64,
    pub max_normal_residual: f64,
    pub all_passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub tolerances: Tolerances,
    pub summary: SuiteSummary,
    pub reports: Vec<EquivalenceReport>,
}

/// Evaluate every instance (in parallel) and summarize in input order.
pub fn run_suite(specs: &[InstanceSpec], tol: &Tolerances) -> SuiteReport {
    let reports: Vec<_> = specs.par_iter().map(|s| evaluate(s, tol)).collect();
    let passed = reports.iter().filter(|r| r.passed).count();
    let max = |f: fn(&EquivalenceReport) -> f64| {
        reports
            .iter()
            .filter(|r| r.instance.label == LabelKind::Centered)
            .map(f)
            .fold(0.0, f64::max)
    };
    let summary = SuiteSummary {
        total: reports.len(),
        passed,
        failed: reports.len() - passed,
        max_conj_residue: max(|r| r.conj_residue),
        max_flip_residue: max(|r| r.flip_residue),
        max_mse_gap: max(|r| r.mse_gap),
        max_normal_residual: max(|r| r.normal_residual.unwrap_or(0.0)),
        all_passed: !reports.is_empty() && passed == reports.len(),
    };
    SuiteReport {
        tolerances: *tol,
        summary,
        reports,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepSize {
    /// `m,n ∈ {4,8}`, `d ∈ {1,3}`, `t ∈ {1,4}`: 16 instances.
    Small,
    /// 100 instances cycling through `m,n ∈ {4,8,16}`, `d ∈ {1,3}`, `t ∈ {1,4}`.
    Full,
}

impl std::str::FromStr for SweepSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(SweepSize::Small),
            "full" => Ok(SweepSize::Full),
            other => Err(Error::InvalidParameter(format!("unknown sweep {other:?}"))),
        }
    }
}

/// Seeded instance sweep. `sigma = None` uses `min(m,n)/8` per instance.
pub fn sweep(seed: u64, size: SweepSize, lambda: f64, sigma: Option<f64>) -> Vec<InstanceSpec> {
    let sizes: &[usize] = match size {
        SweepSize::Small => &[4, 8],
        SweepSize::Full => &[4, 8, 16],
    };
    let mut combos = Vec::new();
    for &m in sizes {
        for &n in sizes {
            for d in [1, 3] {
                for t in [1, 4] {
                    combos.push((m, n, d, t));
                }
            }
        }
    }
    let count = match size {
        SweepSize::Small => combos.len(),
        SweepSize::Full => 100,
    };
    (0..count)
        .map(|i| {
            let (m, n, d, t) = combos[i % combos.len()];
            let inst_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
            let mut spec = InstanceSpec::random(m, n, d, t, inst_seed, lambda);
            if let Some(s) = sigma {
                spec.sigma = s;
            }
            spec
        })
        .collect()
}
