use cqdae::circuit::parse_netlist;
use cqdae::fit::{fit_rational_11, log_grid, RationalEC};
use cqdae::linalg::{RMat, RVec};
use cqdae::steppers::{ConvMode, ConvolutionState};
use cqdae::weights::{bdf_weights, choose_contour, scalar_transfer, BdfScheme, ContourMode};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fft_convolution_matches_naive(n in 1usize..300, rows in 1usize..3, cols in 1usize..3, seed in any::<u64>()) {
        let mut state = seed | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 2001) as f64 / 1000.0 - 1.0
        };
        let weights: Vec<RMat> = (0..n).map(|_| RMat::from_fn(rows, cols, |_, _| next())).collect();
        let mut fast = ConvolutionState::new(weights.clone(), ConvMode::Fft).unwrap();
        let mut slow = ConvolutionState::new(weights, ConvMode::Naive).unwrap();
        for _ in 0..n {
            let (a, b) = (fast.history_sum(), slow.history_sum());
            let scale = 1.0 + b.norm();
            prop_assert!((a - &b).norm() <= 1e-11 * scale);
            let x = RVec::from_fn(cols, |_, _| next());
            fast.push(x.clone()).unwrap();
            slow.push(x).unwrap();
        }
    }

    #[test]
    fn netlist_parser_never_panics(text in "[RCLVDMX0-9a-z =.:\\-\n]{0,120}") {
        let _ = parse_netlist(&text, "fuzz");
    }

    #[test]
    fn weights_are_linear_in_the_kernel(alpha in -5.0f64..5.0, pole in 0.1f64..10.0) {
        let k = scalar_transfer(move |s| Complex64::new(1.0, 0.0) / (s + pole));
        let ks = scalar_transfer(move |s| Complex64::new(alpha, 0.0) / (s + pole));
        let p = choose_contour(24, 0.05, 1e-16, ContourMode::Experiment).unwrap();
        let a = bdf_weights(&k, &BdfScheme::bdf2(), &p).unwrap();
        let b = bdf_weights(&ks, &BdfScheme::bdf2(), &p).unwrap();
        for n in 0..24 {
            prop_assert!((b.weight(n)[(0, 0)] - alpha * a.weight(n)[(0, 0)]).abs() <= 1e-12);
        }
    }

    #[test]
    fn fit_recovers_rational_data(a in 0.1f64..10.0, c in 0.1f64..10.0, d in 0.1f64..10.0) {
        let p = RationalEC { a, c, d };
        let samples: Vec<_> = log_grid(1e-2, 1e2, 40)
            .into_iter()
            .map(|w| {
                let s = Complex64::new(0.0, w);
                (s, p.eval(s))
            })
            .collect();
        let f = fit_rational_11(&samples).unwrap();
        for (x, y) in [(f.a, a), (f.c, c), (f.d, d)] {
            prop_assert!((x - y).abs() <= 1e-8 * y, "{:?} vs {:?}", f, p);
        }
    }
}
