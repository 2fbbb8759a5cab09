//! Direct-summation references, independent of the FFT-based implementation.

#![allow(dead_code)]

use std::f64::consts::PI;

use corrconv::{Complex64, RealGrid, SpectralGrid};

pub fn direct_dft(g: &RealGrid) -> SpectralGrid {
    let (m, n) = g.shape();
    let mut out = SpectralGrid::zeros(m, n);
    for p in 0..m {
        for q in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..m {
                for j in 0..n {
                    // reduce the phase before scaling to keep the angle small
                    let phase = ((p * i) % m) as f64 / m as f64 + ((q * j) % n) as f64 / n as f64;
                    acc += g[(i, j)] * Complex64::from_polar(1.0, -2.0 * PI * phase);
                }
            }
            out[(p, q)] = acc;
        }
    }
    out
}

pub fn direct_correlate(x: &RealGrid, f: &RealGrid) -> RealGrid {
    let (m, n) = x.shape();
    RealGrid::from_fn(m, n, |u, v| {
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..n {
                s += x[(i, j)] * f[((i + u) % m, (j + v) % n)];
            }
        }
        s
    })
}

pub fn direct_convolve(x: &RealGrid, f: &RealGrid) -> RealGrid {
    let (m, n) = x.shape();
    RealGrid::from_fn(m, n, |u, v| {
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..n {
                s += x[(i, j)] * f[((u + m - i) % m, (v + n - j) % n)];
            }
        }
        s
    })
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
