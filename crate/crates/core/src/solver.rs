//! Closed-form ridge solvers for both filter formulations.
//!
//! In the frequency domain the multi-channel ridge problem decouples into one
//! `d×d` Hermitian system per bin `(p,q)`. With `v_k` the vector of channel
//! spectra of sample `k` at that bin, and `u_k = conj(v_k)` for correlation or
//! `u_k = v_k` for convolution:
//!
//! ```text
//! A = Σ_k α_k · conj(u_k) u_kᵀ + λ I
//! b = Σ_k α_k · conj(u_k) ŷ
//! ```
//!
//! `A` is positive definite for `λ > 0`, so each bin is solved by a small
//! Cholesky factorization.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{take_real, Mode, TransformPlan};
use crate::tensorio::{FilterBank, MultiChannelSample, RealGrid, SpectralGrid};

pub const DEFAULT_LAMBDA: f64 = 1e-2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Parameters of one ridge solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveSpec {
    pub lambda: f64,
    pub weights: Vec<f64>,
    pub mode: Mode,
    pub label: RealGrid,
}

impl SolveSpec {
    pub fn new(label: RealGrid, weights: Vec<f64>, lambda: f64, mode: Mode) -> Self {
        Self {
            lambda,
            weights,
            mode,
            label,
        }
    }

    /// Uniform weights `1/t`.
    pub fn uniform(label: RealGrid, t: usize, lambda: f64, mode: Mode) -> Self {
        Self::new(label, vec![1.0 / t as f64; t], lambda, mode)
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }

    pub fn validate(&self, samples: &[MultiChannelSample]) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if samples.is_empty() {
            return Err(Error::InvalidParameter("no training samples".into()));
        }
        if self.weights.len() != samples.len() {
            return Err(Error::Shape(format!(
                "{} weights for {} samples",
                self.weights.len(),
                samples.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite and >= 0".into()));
        }
        if self.weights.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidParameter("all sample weights are zero".into()));
        }
        let shape = self.label.shape();
        let depth = samples[0].depth();
        for (k, s) in samples.iter().enumerate() {
            if s.shape() != shape {
                return Err(Error::Shape(format!(
                    "sample {k} is {:?}, label is {shape:?}",
                    s.shape()
                )));
            }
            if s.depth() != depth {
                return Err(Error::Shape(format!(
                    "sample {k} has {} channels, sample 0 has {depth}",
                    s.depth()
                )));
            }
        }
        Ok(())
    }
}

/// The `d×d` system of one frequency bin. `a` is row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct BinSystem {
    pub row: usize,
    pub col: usize,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

impl BinSystem {
    pub fn depth(&self) -> usize {
        self.b.len()
    }

    pub fn solve(&self) -> Result<Vec<Complex64>> {
        solve_hermitian(&self.a, &self.b).ok_or(Error::NotPositiveDefinite {
            row: self.row,
            col: self.col,
        })
    }

    /// `max |A - Aᴴ|`.
    pub fn hermitian_residue(&self) -> f64 {
        let d = self.depth();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.a[i * d + j] - self.a[j * d + i].conj()).norm());
            }
        }
        worst
    }
}

/// Fold `weight · conj(u) uᵀ` into `gram` and `weight · conj(u) y` into `rhs`.
pub fn accumulate_bin(
    gram: &mut [Complex64],
    rhs: &mut [Complex64],
    u: &[Complex64],
    y: Complex64,
    weight: f64,
) {
    let d = u.len();
    for i in 0..d {
        let ci = u[i].conj() * weight;
        for j in 0..d {
            gram[i * d + j] += ci * u[j];
        }
        rhs[i] += ci * y;
    }
}

/// Solve `A z = b` for Hermitian positive definite `A` (row-major, `d×d`).
/// Returns `None` when a pivot is not strictly positive.
pub fn solve_hermitian(a: &[Complex64], b: &[Complex64]) -> Option<Vec<Complex64>> {
    let d = b.len();
    debug_assert_eq!(a.len(), d * d);
    // lower factor, A = L Lᴴ
    let mut l = vec![ZERO; d * d];
    for j in 0..d {
        let mut diag = a[j * d + j].re;
        for k in 0..j {
            diag -= l[j * d + k].norm_sqr();
        }
        if !(diag > 0.0) {
            return None;
        }
        let ljj = diag.sqrt();
        l[j * d + j] = Complex64::new(ljj, 0.0);
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k].conj();
            }
            l[i * d + j] = s / ljj;
        }
    }
    // L w = b
    let mut w = vec![ZERO; d];
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * w[k];
        }
        w[i] = s / l[i * d + i].re;
    }
    // Lᴴ z = w
    let mut z = vec![ZERO; d];
    for i in (0..d).rev() {
        let mut s = w[i];
        for k in i + 1..d {
            s -= l[k * d + i].conj() * z[k];
        }
        z[i] = s / l[i * d + i].re;
    }
    Some(z)
}

/// Channel spectra of every sample plus the label spectrum.
struct Spectra {
    rows: usize,
    cols: usize,
    depth: usize,
    // samples[k][l] is the spectrum of channel l of sample k
    samples: Vec<Vec<SpectralGrid>>,
    label: SpectralGrid,
}

impl Spectra {
    fn compute(samples: &[MultiChannelSample], spec: &SolveSpec) -> Result<Self> {
        let (rows, cols) = spec.label.shape();
        let plan = TransformPlan::new(rows, cols);
        let sample_spectra = samples
            .iter()
            .map(|s| s.channels().iter().map(|c| plan.forward(c)).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        Ok(Self {
            rows,
            cols,
            depth: samples[0].depth(),
            samples: sample_spectra,
            label: plan.forward(&spec.label)?,
        })
    }

    fn bin(&self, idx: usize, spec: &SolveSpec) -> BinSystem {
        let d = self.depth;
        let mut a = vec![ZERO; d * d];
        let mut b = vec![ZERO; d];
        let mut u = vec![ZERO; d];
        let y = self.label.as_slice()[idx];
        for (channels, &alpha) in self.samples.iter().zip(&spec.weights) {
            if alpha == 0.0 {
                continue;
            }
            for (ul, ch) in u.iter_mut().zip(channels) {
                let v = ch.as_slice()[idx];
                *ul = match spec.mode {
                    Mode::Correlation => v.conj(),
                    Mode::Convolution => v,
                };
            }
            accumulate_bin(&mut a, &mut b, &u, y, alpha);
        }
        for i in 0..d {
            a[i * d + i] += spec.lambda;
        }
        BinSystem {
            row: idx / self.cols,
            col: idx % self.cols,
            a,
            b,
        }
    }
}

/// Per-bin systems in row-major bin order.
pub fn assemble_bin_systems(
    samples: &[MultiChannelSample],
    spec: &SolveSpec,
) -> Result<Vec<BinSystem>> {
    spec.validate(samples)?;
    let spectra = Spectra::compute(samples, spec)?;
    let n_bins = spectra.rows * spectra.cols;
    Ok((0..n_bins)
        .into_par_iter()
        .map(|idx| spectra.bin(idx, spec))
        .collect())
}

/// Reassemble per-bin solutions (row-major bins, `d` values each) into channels.
pub fn bins_to_bank(rows: usize, cols: usize, depth: usize, bins: &[Vec<Complex64>]) -> FilterBank {
    let channels = (0..depth)
        .map(|l| {
            let data = bins.iter().map(|z| z[l]).collect();
            SpectralGrid::new(rows, cols, data).expect("one value per bin")
        })
        .collect();
    FilterBank::Spectral(channels)
}

/// Optimal spectral filter `f̂_*` for the configured mode.
pub fn solve_filter(samples: &[MultiChannelSample], spec: &SolveSpec) -> Result<FilterBank> {
    spec.validate(samples)?;
    let spectra = Spectra::compute(samples, spec)?;
    let n_bins = spectra.rows * spectra.cols;
    let bins = (0..n_bins)
        .into_par_iter()
        .map(|idx| spectra.bin(idx, spec).solve())
        .collect::<Result<Vec<_>>>()?;
    Ok(bins_to_bank(spectra.rows, spectra.cols, spectra.depth, &bins))
}

/// Inverse-transform each channel, requiring a negligible imaginary part.
pub fn filter_to_spatial(fhat: &FilterBank, tol: f64) -> Result<FilterBank> {
    let channels = fhat.spectral()?;
    let (m, n) = fhat.shape();
    let plan = TransformPlan::new(m, n);
    let spatial = channels
        .iter()
        .map(|c| take_real(&plan.inverse(c)?, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(FilterBank::Spatial(spatial))
}

/// Response by direct O(N²) summation, independent of the FFT path.
pub(crate) fn direct_response(
    sample: &MultiChannelSample,
    filter: &[RealGrid],
    mode: Mode,
) -> RealGrid {
    let (m, n) = sample.shape();
    let mut out = RealGrid::zeros(m, n);
    for (x, f) in sample.channels().iter().zip(filter) {
        for u in 0..m {
            for v in 0..n {
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..n {
                        let (fi, fj) = match mode {
                            Mode::Correlation => ((i + u) % m, (j + v) % n),
                            Mode::Convolution => ((u + m - i) % m, (v + n - j) % n),
                        };
                        s += x[(i, j)] * f[(fi, fj)];
                    }
                }
                out[(u, v)] += s;
            }
        }
    }
    out
}

/// Spatial-domain ridge objective
/// `Σ_k α_k ‖Σ_l x_k^l ∘ f^l − y‖² + λ Σ_l ‖f^l‖²`.
pub fn objective_value(
    samples: &[MultiChannelSample],
    spec: &SolveSpec,
    filter: &FilterBank,
) -> Result<f64> {
    spec.validate(samples)?;
    let f = filter.spatial()?;
    if f.len() != samples[0].depth() || filter.shape() != spec.label.shape() {
        return Err(Error::Shape("filter does not match samples".into()));
    }
    let mut total = 0.0;
    for (x, &alpha) in samples.iter().zip(&spec.weights) {
        if alpha == 0.0 {
            continue;
        }
        let r = direct_response(x, f, spec.mode);
        total += alpha * mse(&r, &spec.label)?;
    }
    let reg: f64 = f.iter().map(RealGrid::norm_sq).sum();
    Ok(total + spec.lambda * reg)
}

/// `Σ (R − y)²`.
pub fn mse(response: &RealGrid, y: &RealGrid) -> Result<f64> {
    response.ensure_same_shape(y)?;
    Ok(response
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(r, t)| (r - t) * (r - t))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{gaussian_label, LabelSpec};
    use crate::random::{normal_grid, random_sample, rng};
    use crate::spectral::dft2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn label(m: usize, n: usize) -> RealGrid {
        gaussian_label(&LabelSpec::new(m, n, m.min(n) as f64 / 8.0)).unwrap()
    }

    #[test]
    fn cholesky_solves_known_system() {
        // A = [[4, 1+i], [1-i, 3]], z = [1, i] → b = A z
        let a = vec![c(4.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(3.0, 0.0)];
        let z = [c(1.0, 0.0), c(0.0, 1.0)];
        let b = vec![a[0] * z[0] + a[1] * z[1], a[2] * z[0] + a[3] * z[1]];
        let got = solve_hermitian(&a, &b).unwrap();
        for (g, w) in got.iter().zip(z) {
            assert!((g - w).norm() < 1e-14);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)];
        assert!(solve_hermitian(&a, &[c(1.0, 0.0), c(0.0, 0.0)]).is_none());
        assert!(solve_hermitian(&[c(f64::NAN, 0.0)], &[c(1.0, 0.0)]).is_none());
    }

    #[test]
    fn single_channel_bins_are_scalar() {
        let samples = vec![random_sample(1, 1, 4, 4), random_sample(2, 1, 4, 4)];
        let spec = SolveSpec::new(label(4, 4), vec![0.3, 0.7], 0.05, Mode::Correlation);
        let bins = assemble_bin_systems(&samples, &spec).unwrap();
        let x0 = dft2(&samples[0].channels()[0]);
        let x1 = dft2(&samples[1].channels()[0]);
        for (idx, bin) in bins.iter().enumerate() {
            assert_eq!(bin.a.len(), 1);
            let want = 0.3 * x0.as_slice()[idx].norm_sqr() + 0.7 * x1.as_slice()[idx].norm_sqr() + 0.05;
            assert!((bin.a[0] - c(want, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn impulse_sample_gives_constant_bins() {
        let impulse = RealGrid::delta(4, 4, 0, 0);
        let sample = MultiChannelSample::new(vec![impulse.clone(), impulse]).unwrap();
        let y = label(4, 4);
        let yh = dft2(&y);
        let lambda = 0.1;
        for mode in [Mode::Correlation, Mode::Convolution] {
            let spec = SolveSpec::new(y.clone(), vec![1.0], lambda, mode);
            let bins = assemble_bin_systems(std::slice::from_ref(&sample), &spec).unwrap();
            for (idx, bin) in bins.iter().enumerate() {
                let want = [c(1.0 + lambda, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0 + lambda, 0.0)];
                for (g, w) in bin.a.iter().zip(want) {
                    assert!((g - w).norm() < 1e-14);
                }
                for g in &bin.b {
                    assert!((g - yh.as_slice()[idx]).norm() < 1e-14);
                }
                assert!(bin.hermitian_residue() == 0.0);
            }
        }
    }

    #[test]
    fn zero_samples_give_zero_filter() {
        let samples = vec![MultiChannelSample::zeros(2, 4, 6); 2];
        let spec = SolveSpec::uniform(label(4, 6), 2, 0.01, Mode::Convolution);
        let f = solve_filter(&samples, &spec).unwrap();
        for ch in f.spectral().unwrap() {
            assert!(ch.as_slice().iter().all(|v| *v == ZERO));
        }
        let s = filter_to_spatial(&f, 1e-9).unwrap();
        assert!(s.spatial().unwrap().iter().all(|g| g.max_abs() == 0.0));
    }

    #[test]
    fn delta_sample_closed_form() {
        let y = label(6, 6);
        let yh = dft2(&y);
        let sample = MultiChannelSample::single(RealGrid::delta(6, 6, 0, 0));
        let lambda = 0.25;
        for mode in [Mode::Correlation, Mode::Convolution] {
            let spec = SolveSpec::new(y.clone(), vec![1.0], lambda, mode);
            let f = solve_filter(std::slice::from_ref(&sample), &spec).unwrap();
            let fh = &f.spectral().unwrap()[0];
            for (g, w) in fh.as_slice().iter().zip(yh.as_slice()) {
                assert!((g - w / (1.0 + lambda)).norm() < 1e-13);
            }
            // objective at that filter is λ/(1+λ)·‖y‖²
            let spatial = filter_to_spatial(&f, 1e-9).unwrap();
            let obj = objective_value(std::slice::from_ref(&sample), &spec, &spatial).unwrap();
            let want = lambda / (1.0 + lambda) * y.norm_sq();
            assert!((obj - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn solution_is_hermitian_and_real_in_space() {
        let samples: Vec<_> = (0..3).map(|k| random_sample(40 + k, 2, 8, 7)).collect();
        let spec = SolveSpec::uniform(label(8, 7), 3, 0.01, Mode::Correlation);
        for mode in [Mode::Correlation, Mode::Convolution] {
            let f = solve_filter(&samples, &spec.with_mode(mode)).unwrap();
            for ch in f.spectral().unwrap() {
                assert!(ch.hermitian_residue() < 1e-10);
            }
            assert!(filter_to_spatial(&f, 1e-9).is_ok());
        }
    }

    #[test]
    fn non_hermitian_filter_rejected() {
        let mut g = SpectralGrid::zeros(4, 4);
        g[(1, 2)] = c(1.0, 0.0);
        let err = filter_to_spatial(&FilterBank::Spectral(vec![g]), 1e-9).unwrap_err();
        assert!(matches!(err, Error::ImaginaryResidue { .. }));
    }

    #[test]
    fn correlation_is_conjugate_of_convolution() {
        let samples: Vec<_> = (0..2).map(|k| random_sample(7 + k, 3, 5, 6)).collect();
        let spec = SolveSpec::uniform(label(5, 6), 2, 0.02, Mode::Correlation);
        let corr = solve_filter(&samples, &spec).unwrap();
        let conv = solve_filter(&samples, &spec.with_mode(Mode::Convolution)).unwrap();
        for (a, b) in corr.spectral().unwrap().iter().zip(conv.spectral().unwrap()) {
            assert!(a.max_abs_diff(&b.conj()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn optimum_beats_perturbations() {
        let samples: Vec<_> = (0..2).map(|k| random_sample(90 + k, 2, 4, 4)).collect();
        let spec = SolveSpec::uniform(label(4, 4), 2, 0.01, Mode::Correlation);
        let mut r = rng(123);
        for mode in [Mode::Correlation, Mode::Convolution] {
            let spec = spec.with_mode(mode);
            let best = filter_to_spatial(&solve_filter(&samples, &spec).unwrap(), 1e-9).unwrap();
            let base = objective_value(&samples, &spec, &best).unwrap();
            for _ in 0..20 {
                let dirs: Vec<RealGrid> = (0..2).map(|_| normal_grid(&mut r, 4, 4)).collect();
                let norm: f64 = dirs.iter().map(RealGrid::norm_sq).sum::<f64>().sqrt();
                let moved = best
                    .spatial()
                    .unwrap()
                    .iter()
                    .zip(&dirs)
                    .map(|(f, d)| f.add_scaled(d, 1e-3 / norm).unwrap())
                    .collect();
                let v = objective_value(&samples, &spec, &FilterBank::Spatial(moved)).unwrap();
                assert!(v >= base, "{v} < {base}");
            }
        }
    }

    #[test]
    fn objective_of_zero_filter() {
        let samples: Vec<_> = (0..3).map(|k| random_sample(k, 1, 4, 5)).collect();
        let y = label(4, 5);
        let spec = SolveSpec::new(y.clone(), vec![0.2, 0.0, 1.3], 0.5, Mode::Convolution);
        let zero = FilterBank::Spatial(vec![RealGrid::zeros(4, 5)]);
        let v = objective_value(&samples, &spec, &zero).unwrap();
        assert!((v - 1.5 * y.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_samples_are_skipped() {
        let a = random_sample(1, 2, 4, 4);
        let b = random_sample(2, 2, 4, 4);
        let y = label(4, 4);
        let only_b = solve_filter(
            std::slice::from_ref(&b),
            &SolveSpec::new(y.clone(), vec![1.0], 0.01, Mode::Correlation),
        )
        .unwrap();
        let masked = solve_filter(
            &[a, b],
            &SolveSpec::new(y, vec![0.0, 1.0], 0.01, Mode::Correlation),
        )
        .unwrap();
        assert_eq!(only_b, masked);
    }

    #[test]
    fn invalid_specs_rejected() {
        let samples = vec![random_sample(1, 1, 4, 4)];
        let y = label(4, 4);
        let bad = [
            SolveSpec::new(y.clone(), vec![1.0], 0.0, Mode::Correlation),
            SolveSpec::new(y.clone(), vec![1.0], -1.0, Mode::Correlation),
            SolveSpec::new(y.clone(), vec![0.0], 0.1, Mode::Correlation),
            SolveSpec::new(y.clone(), vec![1.0, 1.0], 0.1, Mode::Correlation),
            SolveSpec::new(y.clone(), vec![-1.0], 0.1, Mode::Correlation),
            SolveSpec::new(label(4, 5), vec![1.0], 0.1, Mode::Correlation),
        ];
        for spec in &bad {
            assert!(solve_filter(&samples, spec).is_err(), "{spec:?}");
        }
        let mixed = vec![random_sample(1, 1, 4, 4), random_sample(2, 2, 4, 4)];
        let spec = SolveSpec::uniform(y, 2, 0.1, Mode::Correlation);
        assert!(assemble_bin_systems(&mixed, &spec).is_err());
    }

    #[test]
    fn mse_cases() {
        let y = label(4, 4);
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        let shifted = y.map(|v| v + 1.0);
        assert!((mse(&shifted, &y).unwrap() - 16.0).abs() < 1e-12);
        let r = normal_grid(&mut rng(4), 4, 4);
        let mut direct = 0.0;
        for k in (0..16).rev() {
            let d = r.as_slice()[k] - y.as_slice()[k];
            direct += d * d;
        }
        assert!((mse(&r, &y).unwrap() - direct).abs() < 1e-12);
        assert!(mse(&r, &label(4, 5)).is_err());
    }
}
