//! Forward kernels and their vector-Jacobian products.
//!
//! Every kernel is sequential with a fixed loop order, so results are
//! bit-identical across runs. Backward functions take the upstream
//! gradient plus whatever forward values they need and return dense
//! gradients.

use super::{Scalar, Shape, Tensor4};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// conv2d

pub fn conv2d_out_shape(x: Shape, w: Shape, stride: usize, pad: usize) -> Result<Shape> {
    if w.c != x.c {
        return Err(Error::Config(format!(
            "conv2d: kernel expects {} input channels, tensor has {}",
            w.c, x.c
        )));
    }
    if stride < 1 {
        return Err(Error::Config("conv2d: stride must be >= 1".into()));
    }
    if x.h + 2 * pad < w.h || x.w + 2 * pad < w.w {
        return Err(Error::Config(format!(
            "conv2d: {}x{} kernel does not fit {}x{} input with pad {pad}",
            w.h, w.w, x.h, x.w
        )));
    }
    let ho = (x.h + 2 * pad - w.h) / stride + 1;
    let wo = (x.w + 2 * pad - w.w) / stride + 1;
    Ok(Shape::new(x.b, w.b, ho, wo))
}

/// Valid output range `[lo, hi)` along one axis for a kernel tap at
/// offset `k`: positions where `o*stride + k - pad` lands inside the
/// input.
#[inline]
fn tap_range(out_len: usize, in_len: usize, stride: usize, pad: usize, k: usize) -> (usize, usize) {
    let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    let max_in = in_len as isize - 1 - k as isize + pad as isize;
    if max_in < 0 {
        return (0, 0);
    }
    let hi = ((max_in as usize) / stride + 1).min(out_len);
    (lo, hi.max(lo))
}

/// Patch matrix for GEMM-style convolution: rows are the `Cin*k*k`
/// kernel taps, columns are all `B*Ho*Wo` output positions. Out-of-range
/// taps are zero. Long contiguous rows keep the inner loops wide even
/// at tiny spatial sizes.
fn im2col<T: Scalar>(x: &Tensor4<T>, ws: Shape, out: Shape, stride: usize, pad: usize) -> Vec<T> {
    let xs = x.shape();
    let cols = out.b * out.h * out.w;
    let mut patches = vec![T::zero(); ws.c * ws.h * ws.w * cols];
    for ic in 0..ws.c {
        for kh in 0..ws.h {
            for kw in 0..ws.w {
                let row = &mut patches[((ic * ws.h + kh) * ws.w + kw) * cols..][..cols];
                let (oh_lo, oh_hi) = tap_range(out.h, xs.h, stride, pad, kh);
                let (ow_lo, ow_hi) = tap_range(out.w, xs.w, stride, pad, kw);
                for b in 0..out.b {
                    let xplane = x.plane(b, ic);
                    let dst = &mut row[b * out.h * out.w..][..out.h * out.w];
                    for oh in oh_lo..oh_hi {
                        let ih = oh * stride + kh - pad;
                        let xrow = &xplane[ih * xs.w..(ih + 1) * xs.w];
                        let drow = &mut dst[oh * out.w..][..out.w];
                        if stride == 1 {
                            let ibase = ow_lo + kw - pad;
                            drow[ow_lo..ow_hi]
                                .copy_from_slice(&xrow[ibase..ibase + (ow_hi - ow_lo)]);
                        } else {
                            for ow in ow_lo..ow_hi {
                                drow[ow] = xrow[ow * stride + kw - pad];
                            }
                        }
                    }
                }
            }
        }
    }
    patches
}

/// Scatter-add the patch-space gradient back onto the input grid
/// (transpose of [`im2col`]).
fn col2im_add<T: Scalar>(
    dpatches: &[T],
    gx: &mut Tensor4<T>,
    ws: Shape,
    out: Shape,
    stride: usize,
    pad: usize,
) {
    let xs = gx.shape();
    let cols = out.b * out.h * out.w;
    for ic in 0..ws.c {
        for kh in 0..ws.h {
            for kw in 0..ws.w {
                let row = &dpatches[((ic * ws.h + kh) * ws.w + kw) * cols..][..cols];
                let (oh_lo, oh_hi) = tap_range(out.h, xs.h, stride, pad, kh);
                let (ow_lo, ow_hi) = tap_range(out.w, xs.w, stride, pad, kw);
                for b in 0..out.b {
                    let src = &row[b * out.h * out.w..][..out.h * out.w];
                    let xplane = gx.plane_mut(b, ic);
                    for oh in oh_lo..oh_hi {
                        let ih = oh * stride + kh - pad;
                        let xrow = &mut xplane[ih * xs.w..(ih + 1) * xs.w];
                        let srow = &src[oh * out.w..][..out.w];
                        if stride == 1 {
                            let ibase = ow_lo + kw - pad;
                            for (xv, sv) in xrow[ibase..ibase + (ow_hi - ow_lo)]
                                .iter_mut()
                                .zip(&srow[ow_lo..ow_hi])
                            {
                                *xv += *sv;
                            }
                        } else {
                            for ow in ow_lo..ow_hi {
                                xrow[ow * stride + kw - pad] += srow[ow];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Dot product with four-way unrolled accumulators (fixed summation
/// order, so results are reproducible run to run).
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = T::zero();
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// Convolution via im2col. Weights are `Cout x Cin x k x k` (stored in
/// the rank-4 layout `b=Cout, c=Cin`), bias is `1 x Cout x 1 x 1`.
pub fn conv2d_fwd<T: Scalar>(
    x: &Tensor4<T>,
    w: &Tensor4<T>,
    bias: &Tensor4<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor4<T>> {
    let xs = x.shape();
    let ws = w.shape();
    let out_shape = conv2d_out_shape(xs, ws, stride, pad)?;
    if bias.shape() != Shape::new(1, ws.b, 1, 1) {
        return Err(Error::Config(format!(
            "conv2d: bias shape {} does not match {} output channels",
            bias.shape(),
            ws.b
        )));
    }
    let patches = im2col(x, ws, out_shape, stride, pad);
    let cols = out_shape.b * out_shape.h * out_shape.w;
    let k_total = ws.c * ws.h * ws.w;
    let plane = out_shape.h * out_shape.w;
    let mut out = Tensor4::zeros(out_shape);
    let mut obuf = vec![T::zero(); cols];
    for oc in 0..ws.b {
        obuf.fill(bias.as_slice()[oc]);
        let wrow = &w.as_slice()[oc * k_total..][..k_total];
        for (k, &wv) in wrow.iter().enumerate() {
            if wv == T::zero() {
                continue;
            }
            let prow = &patches[k * cols..][..cols];
            for (o, &pv) in obuf.iter_mut().zip(prow) {
                *o += wv * pv;
            }
        }
        for b in 0..out_shape.b {
            out.plane_mut(b, oc).copy_from_slice(&obuf[b * plane..][..plane]);
        }
    }
    Ok(out)
}

/// Output gradient rearranged as `Cout x (B*Ho*Wo)` rows.
fn grad_cols<T: Scalar>(g: &Tensor4<T>) -> Vec<T> {
    let gs = g.shape();
    let plane = gs.h * gs.w;
    let cols = gs.b * plane;
    let mut rows = vec![T::zero(); gs.c * cols];
    for oc in 0..gs.c {
        for b in 0..gs.b {
            rows[oc * cols + b * plane..][..plane].copy_from_slice(g.plane(b, oc));
        }
    }
    rows
}

pub fn conv2d_bwd_x<T: Scalar>(
    g: &Tensor4<T>,
    x_shape: Shape,
    w: &Tensor4<T>,
    stride: usize,
    pad: usize,
) -> Tensor4<T> {
    let ws = w.shape();
    let gs = g.shape();
    let cols = gs.b * gs.h * gs.w;
    let k_total = ws.c * ws.h * ws.w;
    let grows = grad_cols(g);
    let mut dpatches = vec![T::zero(); k_total * cols];
    for oc in 0..ws.b {
        let grow = &grows[oc * cols..][..cols];
        let wrow = &w.as_slice()[oc * k_total..][..k_total];
        for (k, &wv) in wrow.iter().enumerate() {
            if wv == T::zero() {
                continue;
            }
            let drow = &mut dpatches[k * cols..][..cols];
            for (d, &gv) in drow.iter_mut().zip(grow) {
                *d += wv * gv;
            }
        }
    }
    let mut gx = Tensor4::zeros(x_shape);
    col2im_add(&dpatches, &mut gx, ws, gs, stride, pad);
    gx
}

pub fn conv2d_bwd_w<T: Scalar>(
    g: &Tensor4<T>,
    x: &Tensor4<T>,
    w_shape: Shape,
    stride: usize,
    pad: usize,
) -> Tensor4<T> {
    let gs = g.shape();
    let cols = gs.b * gs.h * gs.w;
    let k_total = w_shape.c * w_shape.h * w_shape.w;
    let patches = im2col(x, w_shape, gs, stride, pad);
    let grows = grad_cols(g);
    let mut gw = Tensor4::zeros(w_shape);
    for oc in 0..w_shape.b {
        let grow = &grows[oc * cols..][..cols];
        let wrow = &mut gw.as_mut_slice()[oc * k_total..][..k_total];
        for (k, dst) in wrow.iter_mut().enumerate() {
            *dst = dot(grow, &patches[k * cols..][..cols]);
        }
    }
    gw
}

pub fn conv2d_bwd_b<T: Scalar>(g: &Tensor4<T>) -> Tensor4<T> {
    let gs = g.shape();
    let mut gb = Tensor4::zeros(Shape::new(1, gs.c, 1, 1));
    for b in 0..gs.b {
        for c in 0..gs.c {
            let mut acc = T::zero();
            for &v in g.plane(b, c) {
                acc += v;
            }
            gb.as_mut_slice()[c] += acc;
        }
    }
    gb
}

// ---------------------------------------------------------------------------
// instance norm

pub fn plane_mean_var<T: Scalar>(plane: &[T]) -> (T, T) {
    let n = T::from_f64(plane.len() as f64);
    let mut mean = T::zero();
    for &v in plane {
        mean += v;
    }
    mean /= n;
    let mut var = T::zero();
    for &v in plane {
        let d = v - mean;
        var += d * d;
    }
    (mean, var / n)
}

pub fn instance_norm_fwd<T: Scalar>(x: &Tensor4<T>, eps: f64) -> Tensor4<T> {
    let s = x.shape();
    let eps = T::from_f64(eps);
    let mut out = Tensor4::zeros(s);
    for b in 0..s.b {
        for c in 0..s.c {
            let xp = x.plane(b, c);
            let (mean, var) = plane_mean_var(xp);
            let inv = (var + eps).sqrt().recip();
            let op = out.plane_mut(b, c);
            for (o, &v) in op.iter_mut().zip(xp) {
                *o = (v - mean) * inv;
            }
        }
    }
    out
}

pub fn instance_norm_bwd<T: Scalar>(g: &Tensor4<T>, x: &Tensor4<T>, eps: f64) -> Tensor4<T> {
    let s = x.shape();
    let eps = T::from_f64(eps);
    let n = T::from_f64(s.plane() as f64);
    let mut gx = Tensor4::zeros(s);
    for b in 0..s.b {
        for c in 0..s.c {
            let xp = x.plane(b, c);
            let gp = g.plane(b, c);
            let (mean, var) = plane_mean_var(xp);
            let inv = (var + eps).sqrt().recip();
            let mut g_mean = T::zero();
            let mut gy_mean = T::zero();
            for (&gv, &xv) in gp.iter().zip(xp) {
                g_mean += gv;
                gy_mean += gv * (xv - mean) * inv;
            }
            g_mean /= n;
            gy_mean /= n;
            let op = gx.plane_mut(b, c);
            for ((o, &gv), &xv) in op.iter_mut().zip(gp).zip(xp) {
                let y = (xv - mean) * inv;
                *o = inv * (gv - g_mean - y * gy_mean);
            }
        }
    }
    gx
}

// ---------------------------------------------------------------------------
// activations

pub fn relu_fwd<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Derivative at exactly zero is defined as 0.
pub fn relu_bwd<T: Scalar>(g: &Tensor4<T>, x: &Tensor4<T>) -> Tensor4<T> {
    let mut gx = g.clone();
    for (o, &xv) in gx.as_mut_slice().iter_mut().zip(x.as_slice()) {
        if xv <= T::zero() {
            *o = T::zero();
        }
    }
    gx
}

pub fn sigmoid_fwd<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    x.map(|v| (T::one() + (-v).exp()).recip())
}

pub fn sigmoid_bwd<T: Scalar>(g: &Tensor4<T>, y: &Tensor4<T>) -> Tensor4<T> {
    let mut gx = g.clone();
    for (o, &yv) in gx.as_mut_slice().iter_mut().zip(y.as_slice()) {
        *o = *o * yv * (T::one() - yv);
    }
    gx
}

// ---------------------------------------------------------------------------
// upsampling

pub fn upsample_nearest_fwd<T: Scalar>(x: &Tensor4<T>, factor: usize) -> Tensor4<T> {
    let s = x.shape();
    let os = Shape::new(s.b, s.c, s.h * factor, s.w * factor);
    let mut out = Tensor4::zeros(os);
    for b in 0..s.b {
        for c in 0..s.c {
            let xp = x.plane(b, c);
            let op = out.plane_mut(b, c);
            for oh in 0..os.h {
                for ow in 0..os.w {
                    op[oh * os.w + ow] = xp[(oh / factor) * s.w + ow / factor];
                }
            }
        }
    }
    out
}

pub fn upsample_nearest_bwd<T: Scalar>(g: &Tensor4<T>, factor: usize) -> Tensor4<T> {
    let gs = g.shape();
    let is = Shape::new(gs.b, gs.c, gs.h / factor, gs.w / factor);
    let mut gx = Tensor4::zeros(is);
    for b in 0..gs.b {
        for c in 0..gs.c {
            let gp = g.plane(b, c);
            let op = gx.plane_mut(b, c);
            for oh in 0..gs.h {
                for ow in 0..gs.w {
                    op[(oh / factor) * is.w + ow / factor] += gp[oh * gs.w + ow];
                }
            }
        }
    }
    gx
}

/// Bilinear sampling table for one axis (align-corners-false): output
/// position `o` reads inputs `i0, i1` with weights `w0, w1`.
fn bilinear_axis<T: Scalar>(in_len: usize, factor: usize) -> Vec<(usize, usize, T, T)> {
    let out_len = in_len * factor;
    (0..out_len)
        .map(|o| {
            let src = (o as f64 + 0.5) / factor as f64 - 0.5;
            let floor = src.floor();
            let frac = src - floor;
            let i0 = (floor.max(0.0) as usize).min(in_len - 1);
            let i1 = ((floor + 1.0).max(0.0) as usize).min(in_len - 1);
            (i0, i1, T::from_f64(1.0 - frac), T::from_f64(frac))
        })
        .collect()
}

pub fn upsample_bilinear_fwd<T: Scalar>(x: &Tensor4<T>, factor: usize) -> Tensor4<T> {
    let s = x.shape();
    let os = Shape::new(s.b, s.c, s.h * factor, s.w * factor);
    let rows = bilinear_axis::<T>(s.h, factor);
    let cols = bilinear_axis::<T>(s.w, factor);
    let mut out = Tensor4::zeros(os);
    for b in 0..s.b {
        for c in 0..s.c {
            let xp = x.plane(b, c);
            let op = out.plane_mut(b, c);
            for (oh, &(r0, r1, rw0, rw1)) in rows.iter().enumerate() {
                for (ow, &(c0, c1, cw0, cw1)) in cols.iter().enumerate() {
                    let v = rw0 * (cw0 * xp[r0 * s.w + c0] + cw1 * xp[r0 * s.w + c1])
                        + rw1 * (cw0 * xp[r1 * s.w + c0] + cw1 * xp[r1 * s.w + c1]);
                    op[oh * os.w + ow] = v;
                }
            }
        }
    }
    out
}

pub fn upsample_bilinear_bwd<T: Scalar>(g: &Tensor4<T>, factor: usize) -> Tensor4<T> {
    let gs = g.shape();
    let is = Shape::new(gs.b, gs.c, gs.h / factor, gs.w / factor);
    let rows = bilinear_axis::<T>(is.h, factor);
    let cols = bilinear_axis::<T>(is.w, factor);
    let mut gx = Tensor4::zeros(is);
    for b in 0..gs.b {
        for c in 0..gs.c {
            let gp = g.plane(b, c);
            let op = gx.plane_mut(b, c);
            for (oh, &(r0, r1, rw0, rw1)) in rows.iter().enumerate() {
                for (ow, &(c0, c1, cw0, cw1)) in cols.iter().enumerate() {
                    let gv = gp[oh * gs.w + ow];
                    op[r0 * is.w + c0] += rw0 * cw0 * gv;
                    op[r0 * is.w + c1] += rw0 * cw1 * gv;
                    op[r1 * is.w + c0] += rw1 * cw0 * gv;
                    op[r1 * is.w + c1] += rw1 * cw1 * gv;
                }
            }
        }
    }
    gx
}

// ---------------------------------------------------------------------------
// reductions

/// Per-plane reduction to `B x C x 1 x 1`.
fn reduce_planes<T: Scalar>(x: &Tensor4<T>, f: impl Fn(&[T]) -> T) -> Tensor4<T> {
    let s = x.shape();
    let mut out = Tensor4::zeros(Shape::new(s.b, s.c, 1, 1));
    for b in 0..s.b {
        for c in 0..s.c {
            *out.at_mut(b, c, 0, 0) = f(x.plane(b, c));
        }
    }
    out
}

pub fn spatial_sum_fwd<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    reduce_planes(x, |p| p.iter().fold(T::zero(), |a, &v| a + v))
}

pub fn spatial_mean_fwd<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    let n = T::from_f64(x.shape().plane() as f64);
    reduce_planes(x, |p| p.iter().fold(T::zero(), |a, &v| a + v) / n)
}

/// Broadcast a `B x C x 1 x 1` gradient over each plane, scaled.
pub fn spatial_reduce_bwd<T: Scalar>(g: &Tensor4<T>, in_shape: Shape, scale: T) -> Tensor4<T> {
    let mut gx = Tensor4::zeros(in_shape);
    for b in 0..in_shape.b {
        for c in 0..in_shape.c {
            let gv = g.at(b, c, 0, 0) * scale;
            gx.plane_mut(b, c).fill(gv);
        }
    }
    gx
}

pub fn spatial_min_fwd<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    reduce_planes(x, |p| p.iter().fold(T::infinity(), |a, &v| if v < a { v } else { a }))
}

pub fn spatial_max_fwd<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    reduce_planes(x, |p| p.iter().fold(T::neg_infinity(), |a, &v| if v > a { v } else { a }))
}

/// Routes the gradient to the first extremum of each plane (a.e.
/// derivative of min/max; deterministic tie-break).
pub fn spatial_extremum_bwd<T: Scalar>(
    g: &Tensor4<T>,
    x: &Tensor4<T>,
    take_max: bool,
) -> Tensor4<T> {
    let s = x.shape();
    let mut gx = Tensor4::zeros(s);
    for b in 0..s.b {
        for c in 0..s.c {
            let xp = x.plane(b, c);
            let mut best = 0usize;
            for (i, &v) in xp.iter().enumerate() {
                if (take_max && v > xp[best]) || (!take_max && v < xp[best]) {
                    best = i;
                }
            }
            gx.plane_mut(b, c)[best] = g.at(b, c, 0, 0);
        }
    }
    gx
}

pub fn channel_sum_fwd<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    let s = x.shape();
    let mut out = Tensor4::zeros(Shape::new(s.b, 1, s.h, s.w));
    for b in 0..s.b {
        for c in 0..s.c {
            let xp = x.plane(b, c);
            let op = out.plane_mut(b, 0);
            for (o, &v) in op.iter_mut().zip(xp) {
                *o += v;
            }
        }
    }
    out
}

pub fn channel_sum_bwd<T: Scalar>(g: &Tensor4<T>, in_shape: Shape, scale: T) -> Tensor4<T> {
    let mut gx = Tensor4::zeros(in_shape);
    for b in 0..in_shape.b {
        let gp = g.plane(b, 0).to_vec();
        for c in 0..in_shape.c {
            for (o, &gv) in gx.plane_mut(b, c).iter_mut().zip(&gp) {
                *o = gv * scale;
            }
        }
    }
    gx
}

pub fn mean_all_fwd<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    let n = T::from_f64(x.numel() as f64);
    let sum = x.as_slice().iter().fold(T::zero(), |a, &v| a + v);
    Tensor4::scalar(sum / n)
}

pub fn mean_all_bwd<T: Scalar>(g: &Tensor4<T>, in_shape: Shape) -> Tensor4<T> {
    let gv = g.item() / T::from_f64(in_shape.numel() as f64);
    Tensor4::filled(in_shape, gv)
}

pub fn sum_all_fwd<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    Tensor4::scalar(x.as_slice().iter().fold(T::zero(), |a, &v| a + v))
}

// ---------------------------------------------------------------------------
// broadcast binary ops

/// Right-hand shapes may be 1 along any axis the left side is not.
pub fn broadcast_ok(lhs: Shape, rhs: Shape) -> bool {
    (rhs.b == lhs.b || rhs.b == 1)
        && (rhs.c == lhs.c || rhs.c == 1)
        && (rhs.h == lhs.h || rhs.h == 1)
        && (rhs.w == lhs.w || rhs.w == 1)
}

#[inline]
fn bcast_index(s: Shape, b: usize, c: usize, h: usize, w: usize) -> usize {
    let bb = if s.b == 1 { 0 } else { b };
    let cc = if s.c == 1 { 0 } else { c };
    let hh = if s.h == 1 { 0 } else { h };
    let ww = if s.w == 1 { 0 } else { w };
    ((bb * s.c + cc) * s.h + hh) * s.w + ww
}

pub fn broadcast_binary_fwd<T: Scalar>(
    lhs: &Tensor4<T>,
    rhs: &Tensor4<T>,
    f: impl Fn(T, T) -> T,
) -> Tensor4<T> {
    let ls = lhs.shape();
    let rs = rhs.shape();
    if ls == rs {
        let mut out = lhs.clone();
        for (o, &r) in out.as_mut_slice().iter_mut().zip(rhs.as_slice()) {
            *o = f(*o, r);
        }
        return out;
    }
    let mut out = Tensor4::zeros(ls);
    let rdata = rhs.as_slice();
    for b in 0..ls.b {
        for c in 0..ls.c {
            for h in 0..ls.h {
                for w in 0..ls.w {
                    let i = out.index(b, c, h, w);
                    out.as_mut_slice()[i] =
                        f(lhs.as_slice()[i], rdata[bcast_index(rs, b, c, h, w)]);
                }
            }
        }
    }
    out
}

/// Sum a full-shaped gradient down to a broadcast operand's shape.
pub fn reduce_to_shape<T: Scalar>(g: &Tensor4<T>, target: Shape) -> Tensor4<T> {
    let gs = g.shape();
    if gs == target {
        return g.clone();
    }
    let mut out = Tensor4::zeros(target);
    for b in 0..gs.b {
        for c in 0..gs.c {
            for h in 0..gs.h {
                for w in 0..gs.w {
                    let i = bcast_index(target, b, c, h, w);
                    out.as_mut_slice()[i] += g.at(b, c, h, w);
                }
            }
        }
    }
    out
}

/// Pair up a full-shaped gradient with rhs values (broadcast-expanded),
/// producing the elementwise product reduced to `target`.
pub fn mul_reduce_to_shape<T: Scalar>(
    g: &Tensor4<T>,
    other: &Tensor4<T>,
    target: Shape,
    f: impl Fn(T, T) -> T,
) -> Tensor4<T> {
    let gs = g.shape();
    let os = other.shape();
    let mut out = Tensor4::zeros(target);
    for b in 0..gs.b {
        for c in 0..gs.c {
            for h in 0..gs.h {
                for w in 0..gs.w {
                    let gv = g.at(b, c, h, w);
                    let ov = other.as_slice()[bcast_index(os, b, c, h, w)];
                    out.as_mut_slice()[bcast_index(target, b, c, h, w)] += f(gv, ov);
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// channel concat / slice, padding

pub fn concat_channels_fwd<T: Scalar>(parts: &[&Tensor4<T>]) -> Result<Tensor4<T>> {
    let first = parts.first().ok_or_else(|| Error::Usage("concat of empty list".into()))?;
    let s = first.shape();
    let total_c: usize = parts.iter().map(|t| t.shape().c).sum();
    for t in parts {
        let ts = t.shape();
        if ts.b != s.b || ts.h != s.h || ts.w != s.w {
            return Err(Error::Shape(format!("concat_channels: {} vs {}", ts, s)));
        }
    }
    let mut out = Tensor4::zeros(Shape::new(s.b, total_c, s.h, s.w));
    for b in 0..s.b {
        let mut c_off = 0;
        for t in parts {
            for c in 0..t.shape().c {
                out.plane_mut(b, c_off + c).copy_from_slice(t.plane(b, c));
            }
            c_off += t.shape().c;
        }
    }
    Ok(out)
}

pub fn channel_slice_fwd<T: Scalar>(x: &Tensor4<T>, from: usize, len: usize) -> Tensor4<T> {
    let s = x.shape();
    let mut out = Tensor4::zeros(Shape::new(s.b, len, s.h, s.w));
    for b in 0..s.b {
        for c in 0..len {
            out.plane_mut(b, c).copy_from_slice(x.plane(b, from + c));
        }
    }
    out
}

pub fn channel_slice_bwd<T: Scalar>(g: &Tensor4<T>, in_shape: Shape, from: usize) -> Tensor4<T> {
    let gs = g.shape();
    let mut gx = Tensor4::zeros(in_shape);
    for b in 0..gs.b {
        for c in 0..gs.c {
            gx.plane_mut(b, from + c).copy_from_slice(g.plane(b, c));
        }
    }
    gx
}

/// Replicate-pad the right and bottom edges.
pub fn pad_edge_fwd<T: Scalar>(x: &Tensor4<T>, pad_h: usize, pad_w: usize) -> Tensor4<T> {
    let s = x.shape();
    let os = Shape::new(s.b, s.c, s.h + pad_h, s.w + pad_w);
    let mut out = Tensor4::zeros(os);
    for b in 0..s.b {
        for c in 0..s.c {
            let xp = x.plane(b, c);
            let op = out.plane_mut(b, c);
            for h in 0..os.h {
                let ih = h.min(s.h - 1);
                for w in 0..os.w {
                    op[h * os.w + w] = xp[ih * s.w + w.min(s.w - 1)];
                }
            }
        }
    }
    out
}

pub fn pad_edge_bwd<T: Scalar>(g: &Tensor4<T>, in_shape: Shape) -> Tensor4<T> {
    let gs = g.shape();
    let mut gx = Tensor4::zeros(in_shape);
    for b in 0..gs.b {
        for c in 0..gs.c {
            let gp = g.plane(b, c);
            let op = gx.plane_mut(b, c);
            for h in 0..gs.h {
                let ih = h.min(in_shape.h - 1);
                for w in 0..gs.w {
                    op[ih * in_shape.w + w.min(in_shape.w - 1)] += gp[h * gs.w + w];
                }
            }
        }
    }
    gx
}

pub fn crop_fwd<T: Scalar>(x: &Tensor4<T>, h: usize, w: usize) -> Tensor4<T> {
    let s = x.shape();
    let mut out = Tensor4::zeros(Shape::new(s.b, s.c, h, w));
    for b in 0..s.b {
        for c in 0..s.c {
            let xp = x.plane(b, c);
            let op = out.plane_mut(b, c);
            for hh in 0..h {
                op[hh * w..(hh + 1) * w].copy_from_slice(&xp[hh * s.w..hh * s.w + w]);
            }
        }
    }
    out
}

pub fn crop_bwd<T: Scalar>(g: &Tensor4<T>, in_shape: Shape) -> Tensor4<T> {
    let gs = g.shape();
    let mut gx = Tensor4::zeros(in_shape);
    for b in 0..gs.b {
        for c in 0..gs.c {
            let gp = g.plane(b, c);
            let op = gx.plane_mut(b, c);
            for h in 0..gs.h {
                op[h * in_shape.w..h * in_shape.w + gs.w]
                    .copy_from_slice(&gp[h * gs.w..(h + 1) * gs.w]);
            }
        }
    }
    gx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: (usize, usize, usize, usize), data: Vec<f64>) -> Tensor4<f64> {
        Tensor4::from_vec(Shape::new(shape.0, shape.1, shape.2, shape.3), data).unwrap()
    }

    #[test]
    fn conv_all_ones_sums_to_nine() {
        let x = Tensor4::filled(Shape::new(1, 1, 3, 3), 1.0f64);
        let w = Tensor4::filled(Shape::new(1, 1, 3, 3), 1.0f64);
        let b = Tensor4::zeros(Shape::new(1, 1, 1, 1));
        let y = conv2d_fwd(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 1, 1));
        assert_eq!(y.item(), 9.0);
    }

    #[test]
    fn conv_identity_kernel_preserves_input() {
        let x = t((1, 1, 4, 4), (0..16).map(|i| i as f64).collect());
        let mut w = Tensor4::zeros(Shape::new(1, 1, 3, 3));
        *w.at_mut(0, 0, 1, 1) = 1.0;
        let b = Tensor4::zeros(Shape::new(1, 1, 1, 1));
        let y = conv2d_fwd(&x, &w, &b, 1, 1).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let x = Tensor4::<f64>::zeros(Shape::new(1, 3, 4, 4));
        let w = Tensor4::<f64>::zeros(Shape::new(2, 4, 3, 3));
        assert!(conv2d_out_shape(x.shape(), w.shape(), 1, 1).is_err());
    }

    #[test]
    fn conv_strided_output_shape() {
        let s = conv2d_out_shape(Shape::new(2, 3, 8, 8), Shape::new(5, 3, 3, 3), 2, 1).unwrap();
        assert_eq!(s, Shape::new(2, 5, 4, 4));
    }

    #[test]
    fn instance_norm_constant_plane_is_zero() {
        let x = Tensor4::filled(Shape::new(1, 1, 4, 4), 7.0f64);
        let y = instance_norm_fwd(&x, 1e-5);
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn instance_norm_two_point_plane() {
        // [1, 3]: mean 2, var 1 -> (x - 2)/sqrt(1 + eps)
        let x = t((1, 1, 1, 2), vec![1.0, 3.0]);
        let y = instance_norm_fwd(&x, 1e-8);
        assert!((y.as_slice()[0] + 1.0).abs() < 1e-6);
        assert!((y.as_slice()[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gap_of_plane_is_arithmetic_mean() {
        let x = t((1, 1, 2, 2), vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(spatial_mean_fwd(&x).item(), 3.0);
        let c = Tensor4::filled(Shape::new(2, 3, 4, 4), 5.0f64);
        assert!(spatial_mean_fwd(&c).as_slice().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn activations_pointwise() {
        let x = t((1, 1, 1, 3), vec![-2.0, 0.0, 3.0]);
        assert_eq!(relu_fwd(&x).as_slice(), &[0.0, 0.0, 3.0]);
        assert_eq!(sigmoid_fwd(&Tensor4::scalar(0.0f64)).item(), 0.5);
    }

    #[test]
    fn nearest_upsample_replicates() {
        let x = Tensor4::filled(Shape::new(1, 1, 1, 1), 4.5f64);
        let y = upsample_nearest_fwd(&x, 2);
        assert_eq!(y.shape(), Shape::new(1, 1, 2, 2));
        assert!(y.as_slice().iter().all(|&v| v == 4.5));
    }

    #[test]
    fn bilinear_upsample_preserves_mean() {
        let x = t((1, 1, 2, 3), vec![0.3, -1.2, 2.0, 0.7, 0.1, -0.5]);
        for factor in [1, 2, 4] {
            let y = upsample_bilinear_fwd(&x, factor);
            let m_in = mean_all_fwd(&x).item();
            let m_out = mean_all_fwd(&y).item();
            assert!((m_in - m_out).abs() < 1e-6, "factor {factor}: {m_in} vs {m_out}");
        }
    }

    #[test]
    fn broadcast_mul_over_channels() {
        let lhs = Tensor4::filled(Shape::new(1, 3, 2, 2), 2.0f64);
        let rhs = t((1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]);
        let out = broadcast_binary_fwd(&lhs, &rhs, |a, b| a * b);
        for c in 0..3 {
            assert_eq!(out.plane(0, c), &[2.0, 4.0, 6.0, 8.0]);
        }
        let red = reduce_to_shape(&out, rhs.shape());
        assert_eq!(red.plane(0, 0), &[6.0, 12.0, 18.0, 24.0]);
    }

    #[test]
    fn pad_and_crop_are_inverse() {
        let x = t((1, 1, 2, 3), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let p = pad_edge_fwd(&x, 1, 1);
        assert_eq!(p.shape(), Shape::new(1, 1, 3, 4));
        assert_eq!(p.at(0, 0, 2, 3), 6.0);
        assert_eq!(crop_fwd(&p, 2, 3), x);
    }
}
