//! Single-level depthwise Haar decomposition and its inverse.
//!
//! Orthonormal convention: each non-overlapping 2x2 block
//! `[[a, b], [c, d]]` maps to
//!
//! ```text
//! LL = (a + b + c + d) / 2     LH = (a + b - c - d) / 2
//! HL = (a - b + c - d) / 2     HH = (a - b - c + d) / 2
//! ```
//!
//! so the transform is its own transpose-inverse and energy is
//! preserved. Channels are processed independently (depthwise).
//!
//! On the autodiff tape the four bands travel as one tensor with `4C`
//! channels in `[LL | LH | HL | HH]` order; because the map is
//! orthogonal, the backward of the decomposition is the inverse kernel
//! applied to the gradient and vice versa.

use crate::error::{Error, Result};
use crate::tensor::graph::VjpOp;
use crate::tensor::{Graph, NodeId, Scalar, Shape, Tensor4};

/// The four half-resolution sub-bands of one decomposition.
#[derive(Clone, Debug)]
pub struct SubBands<T> {
    pub ll: Tensor4<T>,
    pub lh: Tensor4<T>,
    pub hl: Tensor4<T>,
    pub hh: Tensor4<T>,
}

fn check_even(s: Shape) -> Result<()> {
    if s.h % 2 != 0 || s.w % 2 != 0 {
        return Err(Error::Shape(format!(
            "dwt_haar requires even spatial dims, got {s} (pad with replicate first)"
        )));
    }
    Ok(())
}

/// Stacked kernel: `B x C x H x W` -> `B x 4C x H/2 x W/2`.
pub(crate) fn dwt_stacked<T: Scalar>(x: &Tensor4<T>) -> Result<Tensor4<T>> {
    let s = x.shape();
    check_even(s)?;
    let (hh, hw) = (s.h / 2, s.w / 2);
    let half = T::from_f64(0.5);
    let mut out = Tensor4::zeros(Shape::new(s.b, 4 * s.c, hh, hw));
    for bi in 0..s.b {
        for c in 0..s.c {
            let xp = x.plane(bi, c);
            for band in 0..4 {
                let op = out.plane_mut(bi, band * s.c + c);
                for i in 0..hh {
                    let r0 = &xp[(2 * i) * s.w..(2 * i + 1) * s.w];
                    let r1 = &xp[(2 * i + 1) * s.w..(2 * i + 2) * s.w];
                    for j in 0..hw {
                        let (a, b) = (r0[2 * j], r0[2 * j + 1]);
                        let (cc, d) = (r1[2 * j], r1[2 * j + 1]);
                        op[i * hw + j] = half
                            * match band {
                                0 => a + b + cc + d,
                                1 => a + b - cc - d,
                                2 => a - b + cc - d,
                                _ => a - b - cc + d,
                            };
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Stacked inverse: `B x 4C x H' x W'` -> `B x C x 2H' x 2W'`.
pub(crate) fn idwt_stacked<T: Scalar>(bands: &Tensor4<T>) -> Result<Tensor4<T>> {
    let s = bands.shape();
    if s.c % 4 != 0 {
        return Err(Error::Shape(format!("idwt: channel count {} is not 4*C", s.c)));
    }
    let c_out = s.c / 4;
    let half = T::from_f64(0.5);
    let mut out = Tensor4::zeros(Shape::new(s.b, c_out, 2 * s.h, 2 * s.w));
    for bi in 0..s.b {
        for c in 0..c_out {
            let ll = bands.plane(bi, c);
            let lh = bands.plane(bi, c_out + c);
            let hl = bands.plane(bi, 2 * c_out + c);
            let hh = bands.plane(bi, 3 * c_out + c);
            let op = out.plane_mut(bi, c);
            let ow = 2 * s.w;
            for i in 0..s.h {
                for j in 0..s.w {
                    let k = i * s.w + j;
                    let (l, m, n, o) = (ll[k], lh[k], hl[k], hh[k]);
                    op[(2 * i) * ow + 2 * j] = half * (l + m + n + o);
                    op[(2 * i) * ow + 2 * j + 1] = half * (l + m - n - o);
                    op[(2 * i + 1) * ow + 2 * j] = half * (l - m + n - o);
                    op[(2 * i + 1) * ow + 2 * j + 1] = half * (l - m - n + o);
                }
            }
        }
    }
    Ok(out)
}

/// Decompose a feature map into four sub-bands. Spatial dims must be
/// even; callers pad odd inputs with edge replication.
pub fn dwt_haar<T: Scalar>(x: &Tensor4<T>) -> Result<SubBands<T>> {
    let stacked = dwt_stacked(x)?;
    let c = x.shape().c;
    Ok(SubBands {
        ll: crate::tensor::ops::channel_slice_fwd(&stacked, 0, c),
        lh: crate::tensor::ops::channel_slice_fwd(&stacked, c, c),
        hl: crate::tensor::ops::channel_slice_fwd(&stacked, 2 * c, c),
        hh: crate::tensor::ops::channel_slice_fwd(&stacked, 3 * c, c),
    })
}

/// Reconstruct the feature map from four equal-shape sub-bands; exact
/// inverse of [`dwt_haar`].
pub fn idwt_haar<T: Scalar>(bands: &SubBands<T>) -> Result<Tensor4<T>> {
    let s = bands.ll.shape();
    for (name, band) in [("lh", &bands.lh), ("hl", &bands.hl), ("hh", &bands.hh)] {
        if band.shape() != s {
            return Err(Error::Config(format!(
                "idwt_haar: band {name} shape {} differs from ll {}",
                band.shape(),
                s
            )));
        }
    }
    let stacked =
        crate::tensor::ops::concat_channels_fwd(&[&bands.ll, &bands.lh, &bands.hl, &bands.hh])?;
    idwt_stacked(&stacked)
}

struct DwtOp;

impl<T: Scalar> VjpOp<T> for DwtOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, _inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![idwt_stacked(g).expect("dwt gradient has 4C channels")]
    }
}

struct IdwtOp;

impl<T: Scalar> VjpOp<T> for IdwtOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, _inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![dwt_stacked(g).expect("idwt gradient has even dims")]
    }
}

impl<T: Scalar> Graph<T> {
    /// Differentiable decomposition to the stacked `[LL|LH|HL|HH]`
    /// layout; slice bands out with [`Graph::band`].
    pub fn dwt(&mut self, x: NodeId) -> Result<NodeId> {
        let out = dwt_stacked(self.value(x))?;
        Ok(self.push(out, vec![x], Some(Box::new(DwtOp))))
    }

    /// Band `k` (0=LL, 1=LH, 2=HL, 3=HH) of a stacked decomposition.
    pub fn band(&mut self, stacked: NodeId, k: usize) -> Result<NodeId> {
        let c = self.shape(stacked).c / 4;
        self.channel_slice(stacked, k * c, c)
    }

    /// Differentiable reconstruction from a stacked band tensor.
    pub fn idwt(&mut self, stacked: NodeId) -> Result<NodeId> {
        let out = idwt_stacked(self.value(stacked))?;
        Ok(self.push(out, vec![stacked], Some(Box::new(IdwtOp))))
    }

    /// Reconstruction from four separate band nodes.
    pub fn idwt_bands(
        &mut self,
        ll: NodeId,
        lh: NodeId,
        hl: NodeId,
        hh: NodeId,
    ) -> Result<NodeId> {
        let stacked = self.concat_channels(&[ll, lh, hl, hh])?;
        self.idwt(stacked)
    }
}

pub fn squared_sum<T: Scalar>(t: &Tensor4<T>) -> f64 {
    t.as_slice().iter().map(|&v| v.to_f64() * v.to_f64()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: Shape, seed: u64) -> Tensor4<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor4::from_fn(shape, |_, _, _, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn constant_block_concentrates_in_ll() {
        let x = Tensor4::filled(Shape::new(1, 1, 2, 2), 1.0f64);
        let b = dwt_haar(&x).unwrap();
        assert_eq!(b.ll.item(), 2.0);
        assert_eq!(b.lh.item(), 0.0);
        assert_eq!(b.hl.item(), 0.0);
        assert_eq!(b.hh.item(), 0.0);
    }

    #[test]
    fn block_formulas_match_direct_evaluation() {
        let x = Tensor4::from_vec(Shape::new(1, 1, 2, 2), vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let b = dwt_haar(&x).unwrap();
        assert_eq!(b.ll.item(), 5.0);
        assert_eq!(b.lh.item(), -2.0);
        assert_eq!(b.hl.item(), -1.0);
        assert_eq!(b.hh.item(), 0.0);
    }

    #[test]
    fn energy_is_preserved() {
        let x = random(Shape::new(1, 1, 4, 4), 3);
        let b = dwt_haar(&x).unwrap();
        let band_energy =
            squared_sum(&b.ll) + squared_sum(&b.lh) + squared_sum(&b.hl) + squared_sum(&b.hh);
        let rel = (band_energy - squared_sum(&x)).abs() / squared_sum(&x);
        assert!(rel < 1e-12, "relative energy error {rel}");
    }

    #[test]
    fn round_trip_is_identity() {
        let x = random(Shape::new(2, 3, 8, 6), 11);
        let rec = idwt_haar(&dwt_haar(&x).unwrap()).unwrap();
        assert!(rec.max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn ll_only_band_reconstructs_constant_block() {
        let bands = SubBands {
            ll: Tensor4::scalar(2.0f64),
            lh: Tensor4::scalar(0.0),
            hl: Tensor4::scalar(0.0),
            hh: Tensor4::scalar(0.0),
        };
        let rec = idwt_haar(&bands).unwrap();
        assert_eq!(rec.shape(), Shape::new(1, 1, 2, 2));
        assert!(rec.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_bands_reconstruct_zero() {
        let z = Tensor4::<f64>::zeros(Shape::new(1, 2, 3, 3));
        let bands = SubBands { ll: z.clone(), lh: z.clone(), hl: z.clone(), hh: z };
        let rec = idwt_haar(&bands).unwrap();
        assert!(rec.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn band_shape_mismatch_is_config_error() {
        let bands = SubBands {
            ll: Tensor4::<f64>::zeros(Shape::new(1, 1, 2, 2)),
            lh: Tensor4::zeros(Shape::new(1, 1, 2, 2)),
            hl: Tensor4::zeros(Shape::new(1, 1, 2, 3)),
            hh: Tensor4::zeros(Shape::new(1, 1, 2, 2)),
        };
        assert!(matches!(idwt_haar(&bands), Err(Error::Config(_))));
    }

    #[test]
    fn odd_dims_are_rejected() {
        let x = Tensor4::<f64>::zeros(Shape::new(1, 1, 3, 4));
        assert!(matches!(dwt_haar(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn depthwise_channel_independence() {
        let base = random(Shape::new(1, 3, 4, 4), 17);
        let mut bumped = base.clone();
        *bumped.at_mut(0, 1, 2, 2) += 1.0;
        let a = dwt_haar(&base).unwrap();
        let b = dwt_haar(&bumped).unwrap();
        for (ta, tb) in [(&a.ll, &b.ll), (&a.lh, &b.lh), (&a.hl, &b.hl), (&a.hh, &b.hh)] {
            for c in [0usize, 2] {
                for bi in 0..1 {
                    assert_eq!(ta.plane(bi, c), tb.plane(bi, c), "channel {c} changed");
                }
            }
            assert_ne!(ta.plane(0, 1), tb.plane(0, 1));
        }
    }

    #[test]
    fn graph_round_trip_matches_raw() {
        let x = random(Shape::new(1, 2, 4, 4), 23);
        let mut g = Graph::new();
        let xi = g.leaf(x.clone(), true);
        let bands = g.dwt(xi).unwrap();
        let rec = g.idwt(bands).unwrap();
        assert!(g.value(rec).max_abs_diff(&x) < 1e-12);
        // Linear orthogonal map: gradient of sum(idwt(dwt(x))) is all ones.
        let s = g.sum_all(rec);
        g.backward(s).unwrap();
        let grad = g.grad(xi).unwrap();
        assert!(grad.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }
}
