mod common;

use common::{direct_convolve, direct_correlate, direct_dft, max_diff};
use corrconv::random::{normal_grid, rng};
use corrconv::spectral::{circ_convolve, circ_correlate, dft2, idft2, response};
use corrconv::tensorio::flip;
use corrconv::{Complex64, FilterBank, Mode, MultiChannelSample, RealGrid};
use proptest::prelude::*;

fn pair() -> impl Strategy<Value = (RealGrid, RealGrid)> {
    (1usize..10, 1usize..10).prop_flat_map(|(m, n)| {
        let grid = prop::collection::vec(-10.0f64..10.0, m * n)
            .prop_map(move |v| RealGrid::new(m, n, v).unwrap());
        (grid.clone(), grid)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_matches_direct_dft((x, _) in pair()) {
        let fast = dft2(&x);
        let slow = direct_dft(&x);
        prop_assert!(max_diff(fast.as_slice(), slow.as_slice()) < 1e-10);
        prop_assert!(fast.hermitian_residue() < 1e-10);
    }

    #[test]
    fn parseval((x, _) in pair()) {
        let n = x.len() as f64;
        let lhs = x.norm_sq();
        let rhs: f64 = dft2(&x).as_slice().iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1.0));
    }

    #[test]
    fn correlation_and_convolution_theorems((x, f) in pair()) {
        let xh = dft2(&x);
        let fh = dft2(&f);
        let corr = circ_correlate(&x, &f).unwrap();
        prop_assert!(corr.max_abs_diff(&direct_correlate(&x, &f)).unwrap() < 1e-10);
        let want: Vec<Complex64> = xh.as_slice().iter().zip(fh.as_slice()).map(|(a, b)| a.conj() * b).collect();
        prop_assert!(max_diff(dft2(&corr).as_slice(), &want) < 1e-9);

        let conv = circ_convolve(&x, &f).unwrap();
        prop_assert!(conv.max_abs_diff(&direct_convolve(&x, &f)).unwrap() < 1e-10);
        let want: Vec<Complex64> = xh.as_slice().iter().zip(fh.as_slice()).map(|(a, b)| a * b).collect();
        prop_assert!(max_diff(dft2(&conv).as_slice(), &want) < 1e-9);
    }

    #[test]
    fn flip_bridge((x, f) in pair()) {
        let lhs = circ_convolve(&x, &f).unwrap();
        let rhs = flip(&circ_correlate(&x, &flip(&f)).unwrap());
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
    }

    #[test]
    fn inverse_roundtrip((x, _) in pair()) {
        let back = idft2(&dft2(&x));
        prop_assert!(back.max_abs_imag() < 1e-12 * (1.0 + x.max_abs()));
        let re: Vec<f64> = back.as_slice().iter().map(|v| v.re).collect();
        let diff = re.iter().zip(x.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-12 * (1.0 + x.max_abs()));
    }

    #[test]
    fn response_is_bilinear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng(seed);
        let (m, n) = (5, 4);
        let chan = |r: &mut _| normal_grid(r, m, n);
        let x1 = MultiChannelSample::new(vec![chan(&mut r), chan(&mut r)]).unwrap();
        let x2 = MultiChannelSample::new(vec![chan(&mut r), chan(&mut r)]).unwrap();
        let f1 = vec![chan(&mut r), chan(&mut r)];
        let f2 = vec![chan(&mut r), chan(&mut r)];
        for mode in [Mode::Correlation, Mode::Convolution] {
            let resp = |x: &MultiChannelSample, f: &Vec<RealGrid>| response(x, &FilterBank::Spatial(f.clone()), mode).unwrap();
            // linear in the filter
            let fc: Vec<RealGrid> = f1.iter().zip(&f2).map(|(p, q)| p.map(|v| a * v).add_scaled(q, b).unwrap()).collect();
            let lhs = resp(&x1, &fc);
            let rhs = resp(&x1, &f1).map(|v| a * v).add_scaled(&resp(&x1, &f2), b).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
            // linear in the sample
            let xc = MultiChannelSample::new(
                x1.channels().iter().zip(x2.channels()).map(|(p, q)| p.map(|v| a * v).add_scaled(q, b).unwrap()).collect(),
            ).unwrap();
            let lhs = resp(&xc, &f1);
            let rhs = resp(&x1, &f1).map(|v| a * v).add_scaled(&resp(&x2, &f1), b).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
        }
    }
}
