//! Randomized invariants for the numerically sensitive kernels.

use std::rc::Rc;

use proptest::prelude::*;

use cgat_tensor::{gelu_scalar, Segments, Tape, Tensor};

proptest! {
    #[test]
    fn segment_softmax_rows_sum_to_one(
        scores in proptest::collection::vec(-30.0f64..30.0, 1..24),
        split in 0usize..24,
    ) {
        let cut = split.min(scores.len());
        let offsets: Vec<usize> = if cut == 0 || cut == scores.len() {
            vec![0, scores.len()]
        } else {
            vec![0, cut, scores.len()]
        };
        let segs = Rc::new(Segments::from_offsets(offsets).unwrap());
        let mut tape = Tape::new();
        let s = tape.leaf(Tensor::vector(scores));
        let w = tape.segment_softmax(s, Rc::clone(&segs)).unwrap();
        let out = tape.value(w).data();
        for seg in 0..segs.n_segments() {
            let sum: f64 = segs.range(seg).map(|e| out[e]).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12, "segment {} sums to {}", seg, sum);
            for e in segs.range(seg) {
                prop_assert!(out[e] >= 0.0 && out[e] <= 1.0);
            }
        }
    }

    #[test]
    fn segment_softmax_is_shift_invariant(
        scores in proptest::collection::vec(-20.0f64..20.0, 2..12),
        shift in -100.0f64..100.0,
    ) {
        let segs = Rc::new(Segments::from_offsets(vec![0, scores.len()]).unwrap());
        let mut tape = Tape::new();
        let shifted: Vec<f64> = scores.iter().map(|v| v + shift).collect();
        let a = tape.leaf(Tensor::vector(scores));
        let b = tape.leaf(Tensor::vector(shifted));
        let wa = tape.segment_softmax(a, Rc::clone(&segs)).unwrap();
        let wb = tape.segment_softmax(b, segs).unwrap();
        for (x, y) in tape.value(wa).data().iter().zip(tape.value(wb).data()) {
            prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
        }
    }

    #[test]
    fn gelu_stays_inside_its_envelope(x in -50.0f64..50.0) {
        let y = gelu_scalar(x);
        if x >= 0.0 {
            prop_assert!(y >= 0.0 && y <= x + 1e-15);
        } else {
            prop_assert!(y <= 0.0 && y >= x - 1e-15);
        }
    }

    #[test]
    fn layer_norm_output_rows_are_standardized(
        row in proptest::collection::vec(-10.0f64..10.0, 4..16),
    ) {
        let spread = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - row.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 0.1);
        let n = row.len();
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(1, n, row).unwrap());
        let gain = tape.leaf(Tensor::filled(&[n], 1.0));
        let bias = tape.leaf(Tensor::zeros(&[n]));
        let y = tape.layer_norm(x, gain, bias, 1e-5).unwrap();
        let out = tape.value(y).data();
        let mean: f64 = out.iter().sum::<f64>() / n as f64;
        let var: f64 = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        prop_assert!(mean.abs() < 1e-10, "mean {}", mean);
        prop_assert!(var <= 1.0 + 1e-9 && var > 0.9, "var {}", var);
    }
}
