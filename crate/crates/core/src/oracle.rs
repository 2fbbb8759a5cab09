//! Dense reference solvers.
//!
//! [`build_dense`] writes the ridge problem as one real least-squares system
//! in the spatial domain: unknowns are the `d·N` filter coefficients, rows are
//! the `t·N` response positions scaled by `√α_k`. It never touches an FFT,
//! so agreement with [`crate::solver::solve_filter`] is a meaningful check.
//!
//! [`normal_equations`] and [`normal_equation_residual`] materialize the
//! frequency-domain design matrices `X̂_k` densely to check the per-bin solver
//! against the unstructured normal equations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{dft2, Mode};
use crate::solver::SolveSpec;
use crate::tensorio::{FilterBank, MultiChannelSample, RealGrid, SpectralGrid};

/// Upper bound on `N·d` accepted by the dense builders.
pub const MAX_UNKNOWNS: usize = 4096;

#[derive(Clone, Debug)]
pub struct DenseSystem {
    pub design: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub lambda: f64,
    pub depth: usize,
    pub rows: usize,
    pub cols: usize,
}

/// Coefficient linking filter position `c` to response position `r`.
fn operator_coefficient(x: &RealGrid, r: (usize, usize), c: (usize, usize), mode: Mode) -> f64 {
    let (m, n) = x.shape();
    match mode {
        // out[u] = Σ_i x[i] f[i+u]  ⇒  x[c − u]
        Mode::Correlation => x[((c.0 + m - r.0) % m, (c.1 + n - r.1) % n)],
        // out[u] = Σ_i x[i] f[u−i]  ⇒  x[u − c]
        Mode::Convolution => x[((r.0 + m - c.0) % m, (r.1 + n - c.1) % n)],
    }
}

fn guard(samples: &[MultiChannelSample]) -> Result<()> {
    let unknowns = samples[0].area() * samples[0].depth();
    if unknowns > MAX_UNKNOWNS {
        return Err(Error::TooLarge(unknowns));
    }
    Ok(())
}

pub fn build_dense(samples: &[MultiChannelSample], spec: &SolveSpec) -> Result<DenseSystem> {
    spec.validate(samples)?;
    guard(samples)?;
    let (m, n) = spec.label.shape();
    let big_n = m * n;
    let d = samples[0].depth();
    let t = samples.len();
    let mut design = DMatrix::<f64>::zeros(t * big_n, d * big_n);
    let mut rhs = DVector::<f64>::zeros(t * big_n);
    for (k, (sample, &alpha)) in samples.iter().zip(&spec.weights).enumerate() {
        let w = alpha.sqrt();
        for r in 0..big_n {
            let row = k * big_n + r;
            rhs[row] = w * spec.label.as_slice()[r];
            if w == 0.0 {
                continue;
            }
            for (l, x) in sample.channels().iter().enumerate() {
                for c in 0..big_n {
                    design[(row, l * big_n + c)] =
                        w * operator_coefficient(x, (r / n, r % n), (c / n, c % n), spec.mode);
                }
            }
        }
    }
    Ok(DenseSystem {
        design,
        rhs,
        lambda: spec.lambda,
        depth: d,
        rows: m,
        cols: n,
    })
}

/// Solve `(MᵀM + λI) w = Mᵀ rhs` and reshape `w` into spatial channels.
pub fn dense_solve(system: &DenseSystem) -> Result<FilterBank> {
    let mt = system.design.transpose();
    let mut normal = &mt * &system.design;
    for i in 0..normal.nrows() {
        normal[(i, i)] += system.lambda;
    }
    let rhs = &mt * &system.rhs;
    let chol = normal
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { row: 0, col: 0 })?;
    let w = chol.solve(&rhs);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite { row: 0, col: 0 });
    }
    let big_n = system.rows * system.cols;
    let channels = (0..system.depth)
        .map(|l| {
            RealGrid::new(
                system.rows,
                system.cols,
                w.as_slice()[l * big_n..(l + 1) * big_n].to_vec(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FilterBank::Spatial(channels))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub max_abs: f64,
    /// `max_abs` relative to the largest reference magnitude.
    pub max_rel: f64,
    pub pass: bool,
}

pub fn compare(reference: &FilterBank, candidate: &FilterBank, tol: f64) -> Result<Comparison> {
    let a = reference.spatial()?;
    let b = candidate.spatial()?;
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} channels", a.len(), b.len())));
    }
    let mut max_abs = 0.0f64;
    let mut scale = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        max_abs = max_abs.max(x.max_abs_diff(y)?);
        scale = scale.max(x.max_abs());
    }
    let max_rel = if max_abs == 0.0 {
        0.0
    } else {
        max_abs / scale.max(f64::MIN_POSITIVE)
    };
    Ok(Comparison {
        max_abs,
        max_rel,
        pass: max_rel <= tol,
    })
}

/// Dense `N × dN` matrix `X̂_k`: `[diag(x̂^1)ᴴ, …]` for correlation,
/// `[diag(x̂^1), …]` for convolution.
fn design_spectral(sample: &MultiChannelSample, mode: Mode) -> DMatrix<Complex64> {
    let big_n = sample.area();
    let d = sample.depth();
    let mut x = DMatrix::<Complex64>::zeros(big_n, d * big_n);
    for (l, ch) in sample.channels().iter().enumerate() {
        let spec = dft2(ch);
        for (i, v) in spec.as_slice().iter().enumerate() {
            x[(i, l * big_n + i)] = match mode {
                Mode::Correlation => v.conj(),
                Mode::Convolution => *v,
            };
        }
    }
    x
}

fn stacked(bank: &FilterBank) -> Result<DVector<Complex64>> {
    let channels = bank.spectral()?;
    Ok(DVector::from_iterator(
        channels.iter().map(SpectralGrid::len).sum(),
        channels.iter().flat_map(|c| c.as_slice().iter().copied()),
    ))
}

/// Explicit `dN × dN` matrix `Σ α_k X̂_kᴴX̂_k + λI` and right-hand side
/// `Σ α_k X̂_kᴴ ŷ`. Intended for small instances.
pub fn normal_equations(
    samples: &[MultiChannelSample],
    spec: &SolveSpec,
) -> Result<(DMatrix<Complex64>, DVector<Complex64>)> {
    spec.validate(samples)?;
    guard(samples)?;
    let big_n = samples[0].area();
    let dn = big_n * samples[0].depth();
    let yh = DVector::from_column_slice(dft2(&spec.label).as_slice());
    let mut lhs = DMatrix::<Complex64>::identity(dn, dn) * Complex64::new(spec.lambda, 0.0);
    let mut rhs = DVector::<Complex64>::zeros(dn);
    for (sample, &alpha) in samples.iter().zip(&spec.weights) {
        let x = design_spectral(sample, spec.mode);
        let xh = x.adjoint();
        let a = Complex64::new(alpha, 0.0);
        lhs += (&xh * &x) * a;
        rhs += (&xh * &yh) * a;
    }
    Ok((lhs, rhs))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalResidual {
    pub residual: f64,
    pub rhs_norm: f64,
}

impl NormalResidual {
    /// `residual ≤ tol·(1 + ‖rhs‖)`.
    pub fn within(&self, tol: f64) -> bool {
        self.residual <= tol * (1.0 + self.rhs_norm)
    }
}

/// `‖Σ α_k X̂_kᴴ(X̂_k f̂) + λ f̂ − Σ α_k X̂_kᴴ ŷ‖` with each `X̂_k` held densely.
pub fn normal_equation_residual(
    samples: &[MultiChannelSample],
    spec: &SolveSpec,
    fhat: &FilterBank,
) -> Result<NormalResidual> {
    spec.validate(samples)?;
    guard(samples)?;
    let f = stacked(fhat)?;
    let dn = samples[0].area() * samples[0].depth();
    if f.len() != dn {
        return Err(Error::Shape(format!("filter has {} values, expected {dn}", f.len())));
    }
    let yh = DVector::from_column_slice(dft2(&spec.label).as_slice());
    let mut lhs = &f * Complex64::new(spec.lambda, 0.0);
    let mut rhs = DVector::<Complex64>::zeros(dn);
    for (sample, &alpha) in samples.iter().zip(&spec.weights) {
        let x = design_spectral(sample, spec.mode);
        let a = Complex64::new(alpha, 0.0);
        lhs += x.ad_mul(&(&x * &f)) * a;
        rhs += x.ad_mul(&yh) * a;
    }
    Ok(NormalResidual {
        residual: (lhs - &rhs).norm(),
        rhs_norm: rhs.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{gaussian_label, LabelSpec};
    use crate::random::random_sample;
    use crate::solver::{assemble_bin_systems, filter_to_spatial, solve_filter};
    use crate::spectral::response;

    fn label(m: usize) -> RealGrid {
        gaussian_label(&LabelSpec::new(m, m, m as f64 / 8.0)).unwrap()
    }

    #[test]
    fn impulse_design_is_identity() {
        let sample = MultiChannelSample::single(RealGrid::delta(2, 2, 0, 0));
        for mode in [Mode::Correlation, Mode::Convolution] {
            let spec = SolveSpec::new(label(2), vec![1.0], 0.01, mode);
            let sys = build_dense(std::slice::from_ref(&sample), &spec).unwrap();
            assert_eq!(sys.design, DMatrix::identity(4, 4));
        }
    }

    #[test]
    fn column_probes_match_operator() {
        let samples = vec![random_sample(3, 2, 4, 4), random_sample(4, 2, 4, 4)];
        let weights = vec![0.25, 1.0];
        for mode in [Mode::Correlation, Mode::Convolution] {
            let spec = SolveSpec::new(label(4), weights.clone(), 0.01, mode);
            let sys = build_dense(&samples, &spec).unwrap();
            for col in 0..32 {
                let mut channels = vec![RealGrid::zeros(4, 4); 2];
                channels[col / 16].as_mut_slice()[col % 16] = 1.0;
                let bank = FilterBank::Spatial(channels);
                for (k, s) in samples.iter().enumerate() {
                    let r = response(s, &bank, mode).unwrap();
                    for pos in 0..16 {
                        let want = weights[k].sqrt() * r.as_slice()[pos];
                        assert!((sys.design[(k * 16 + pos, col)] - want).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_weight_rows_vanish() {
        let samples = vec![random_sample(1, 1, 4, 4), random_sample(2, 1, 4, 4)];
        let spec = SolveSpec::new(label(4), vec![0.0, 1.0], 0.01, Mode::Correlation);
        let sys = build_dense(&samples, &spec).unwrap();
        assert!(sys.design.rows(0, 16).iter().all(|&v| v == 0.0));
        assert!(sys.rhs.rows(0, 16).iter().all(|&v| v == 0.0));
        assert!(sys.design.rows(16, 16).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn delta_sample_gives_scaled_label() {
        let y = label(2);
        let sample = MultiChannelSample::single(RealGrid::delta(2, 2, 0, 0));
        for mode in [Mode::Correlation, Mode::Convolution] {
            let spec = SolveSpec::new(y.clone(), vec![1.0], 0.01, mode);
            let f = dense_solve(&build_dense(std::slice::from_ref(&sample), &spec).unwrap()).unwrap();
            let want = y.map(|v| v / 1.01);
            assert!(f.spatial().unwrap()[0].max_abs_diff(&want).unwrap() < 1e-14);
        }
    }

    #[test]
    fn zero_samples_zero_filter() {
        let samples = vec![MultiChannelSample::zeros(2, 4, 4)];
        let spec = SolveSpec::new(label(4), vec![1.0], 0.01, Mode::Convolution);
        let f = dense_solve(&build_dense(&samples, &spec).unwrap()).unwrap();
        assert!(f.spatial().unwrap().iter().all(|g| g.max_abs() == 0.0));
    }

    #[test]
    fn guard_rejects_large() {
        let samples = vec![MultiChannelSample::zeros(2, 64, 64)];
        let spec = SolveSpec::new(gaussian_label(&LabelSpec::new(64, 64, 4.0)).unwrap(), vec![1.0], 0.01, Mode::Correlation);
        assert!(matches!(build_dense(&samples, &spec), Err(Error::TooLarge(8192))));
    }

    #[test]
    fn compare_cases() {
        let a = FilterBank::Spatial(vec![label(4), label(4).map(|v| -v)]);
        let same = compare(&a, &a, 1e-6).unwrap();
        assert_eq!((same.max_abs, same.max_rel, same.pass), (0.0, 0.0, true));

        let mut channels = a.spatial().unwrap().to_vec();
        channels[1][(2, 3)] += 1e-3;
        let c = compare(&a, &FilterBank::Spatial(channels), 1e-6).unwrap();
        assert!((c.max_abs - 1e-3).abs() < 1e-15);
        assert!(!c.pass);

        let short = FilterBank::Spatial(vec![label(4)]);
        assert!(compare(&a, &short, 1e-6).is_err());
    }

    #[test]
    fn dense_matches_spectral_8x8() {
        let samples: Vec<_> = (0..2).map(|k| random_sample(200 + k, 2, 8, 8)).collect();
        for mode in [Mode::Correlation, Mode::Convolution] {
            let spec = SolveSpec::uniform(label(8), 2, 0.01, mode);
            let dense = dense_solve(&build_dense(&samples, &spec).unwrap()).unwrap();
            let spectral = filter_to_spatial(&solve_filter(&samples, &spec).unwrap(), 1e-9).unwrap();
            let c = compare(&dense, &spectral, 1e-6).unwrap();
            assert!(c.pass, "{mode}: {c:?}");
        }
    }

    #[test]
    fn bin_systems_are_slices_of_dense_normal_matrix() {
        let samples: Vec<_> = (0..2).map(|k| random_sample(60 + k, 2, 4, 4)).collect();
        for mode in [Mode::Correlation, Mode::Convolution] {
            let spec = SolveSpec::new(label(4), vec![0.4, 0.6], 0.03, mode);
            let (lhs, rhs) = normal_equations(&samples, &spec).unwrap();
            let bins = assemble_bin_systems(&samples, &spec).unwrap();
            for (idx, bin) in bins.iter().enumerate() {
                for i in 0..2 {
                    assert!((bin.b[i] - rhs[i * 16 + idx]).norm() < 1e-12);
                    for j in 0..2 {
                        let dense = lhs[(i * 16 + idx, j * 16 + idx)];
                        assert!((bin.a[i * 2 + j] - dense).norm() < 1e-12);
                    }
                }
            }
            // everything off the per-bin pattern is zero
            for r in 0..32 {
                for c in 0..32 {
                    if r % 16 != c % 16 {
                        assert_eq!(lhs[(r, c)], Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn residual_small_at_solution_large_elsewhere() {
        let samples: Vec<_> = (0..3).map(|k| random_sample(70 + k, 3, 6, 4)).collect();
        let spec = SolveSpec::uniform(
            gaussian_label(&LabelSpec::new(6, 4, 0.5)).unwrap(),
            3,
            0.01,
            Mode::Convolution,
        );
        let f = solve_filter(&samples, &spec).unwrap();
        let r = normal_equation_residual(&samples, &spec, &f).unwrap();
        assert!(r.within(1e-10), "{r:?}");
        let wrong = FilterBank::Spectral(f.spectral().unwrap().iter().map(|c| c.conj()).collect());
        let r = normal_equation_residual(&samples, &spec, &wrong).unwrap();
        assert!(!r.within(1e-6));
    }
}
