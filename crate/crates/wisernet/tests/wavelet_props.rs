//! Property tests for the Haar decomposition: exact reconstruction,
//! linearity, energy preservation, and depthwise independence on
//! arbitrary shapes and values.

use proptest::prelude::*;
use wisernet::tensor::{Shape, Tensor4};
use wisernet::wavelet::{dwt_haar, idwt_haar, squared_sum, SubBands};

fn arb_tensor() -> impl Strategy<Value = Tensor4<f32>> {
    (1usize..3, 1usize..5, 1usize..9, 1usize..9).prop_flat_map(|(b, c, hh, hw)| {
        let shape = Shape::new(b, c, 2 * hh, 2 * hw);
        proptest::collection::vec(-10.0f32..10.0, shape.numel())
            .prop_map(move |data| Tensor4::from_vec(shape, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_and_energy(x in arb_tensor()) {
        let bands = dwt_haar(&x).unwrap();
        let rec = idwt_haar(&bands).unwrap();
        prop_assert!(rec.max_abs_diff(&x) < 1e-5);

        let e_in = squared_sum(&x);
        let e_bands = squared_sum(&bands.ll)
            + squared_sum(&bands.lh)
            + squared_sum(&bands.hl)
            + squared_sum(&bands.hh);
        prop_assert!((e_bands - e_in).abs() <= 1e-4 * e_in.max(1e-6));
    }

    #[test]
    fn linearity(x in arb_tensor(), a in -3.0f32..3.0, b in -3.0f32..3.0) {
        // Same shape second operand from a deterministic transform of x.
        let y = x.map(|v| v * 0.7 - 1.3);
        let combined = Tensor4::from_vec(
            x.shape(),
            x.as_slice()
                .iter()
                .zip(y.as_slice())
                .map(|(&xv, &yv)| a * xv + b * yv)
                .collect(),
        )
        .unwrap();
        let lhs = dwt_haar(&combined).unwrap();
        let bx = dwt_haar(&x).unwrap();
        let by = dwt_haar(&y).unwrap();
        for (l, (px, py)) in [
            (&lhs.ll, (&bx.ll, &by.ll)),
            (&lhs.lh, (&bx.lh, &by.lh)),
            (&lhs.hl, (&bx.hl, &by.hl)),
            (&lhs.hh, (&bx.hh, &by.hh)),
        ] {
            let rhs = Tensor4::from_vec(
                px.shape(),
                px.as_slice()
                    .iter()
                    .zip(py.as_slice())
                    .map(|(&xv, &yv)| a * xv + b * yv)
                    .collect(),
            )
            .unwrap();
            prop_assert!(l.max_abs_diff(&rhs) < 1e-4);
        }
    }

    #[test]
    fn ll_only_inverse_round_trip(x in arb_tensor()) {
        // idwt is a bijection: running it on arbitrary bands and
        // decomposing again recovers the bands.
        let s = x.shape();
        let band_shape = Shape::new(s.b, s.c, s.h / 2, s.w / 2);
        let to_band = |t: &Tensor4<f32>, scale: f32| {
            Tensor4::from_vec(
                band_shape,
                (0..band_shape.numel()).map(|i| t.as_slice()[i] * scale).collect(),
            )
            .unwrap()
        };
        let bands = SubBands {
            ll: to_band(&x, 1.0),
            lh: to_band(&x, -0.5),
            hl: to_band(&x, 0.25),
            hh: to_band(&x, 2.0),
        };
        let rec = idwt_haar(&bands).unwrap();
        let back = dwt_haar(&rec).unwrap();
        prop_assert!(back.ll.max_abs_diff(&bands.ll) < 1e-4);
        prop_assert!(back.lh.max_abs_diff(&bands.lh) < 1e-4);
        prop_assert!(back.hl.max_abs_diff(&bands.hl) < 1e-4);
        prop_assert!(back.hh.max_abs_diff(&bands.hh) < 1e-4);
    }
}
