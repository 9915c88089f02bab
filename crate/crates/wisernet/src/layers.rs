//! Conv layer plumbing shared by the backbone and the skip filter.

use rand::Rng;

use crate::error::Result;
use crate::tensor::{Graph, NodeId, ParamId, ParamStore, Scalar, Shape, Tensor4};

/// One conv2d with bias, registered in a [`ParamStore`].
#[derive(Clone, Copy, Debug)]
pub struct ConvLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub pad: usize,
}

impl ConvLayer {
    /// Kaiming-uniform weight init, zero bias.
    #[allow(clippy::too_many_arguments)]
    pub fn init<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = (c_in * k * k) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let w = Tensor4::from_fn(Shape::new(c_out, c_in, k, k), |_, _, _, _| {
            T::from_f64(rng.random_range(-bound..bound))
        });
        let b = Tensor4::zeros(Shape::new(1, c_out, 1, 1));
        ConvLayer {
            w: store.register(format!("{name}.w"), w),
            b: store.register(format!("{name}.b"), b),
            stride,
            pad,
        }
    }

    /// All-zero weights and bias (identity-at-init gates).
    pub fn init_zero<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        let w = Tensor4::zeros(Shape::new(c_out, c_in, k, k));
        let b = Tensor4::zeros(Shape::new(1, c_out, 1, 1));
        ConvLayer {
            w: store.register(format!("{name}.w"), w),
            b: store.register(format!("{name}.b"), b),
            stride,
            pad,
        }
    }

    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: NodeId,
    ) -> Result<NodeId> {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        g.conv2d(x, w, b, self.stride, self.pad)
    }

    pub fn forward_relu<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: NodeId,
    ) -> Result<NodeId> {
        let y = self.forward(g, store, x)?;
        Ok(g.relu(y))
    }

    /// Analytic multiply-accumulate count for a given input size:
    /// `out_elems * k^2 * c_in`.
    pub fn macs<T: Scalar>(&self, store: &ParamStore<T>, in_h: usize, in_w: usize) -> usize {
        let ws = store.value(self.w).shape();
        let out = crate::tensor::ops::conv2d_out_shape(
            Shape::new(1, ws.c, in_h, in_w),
            ws,
            self.stride,
            self.pad,
        )
        .expect("layer geometry is valid");
        out.c * out.h * out.w * ws.h * ws.w * ws.c
    }

    pub fn param_count<T: Scalar>(&self, store: &ParamStore<T>) -> usize {
        store.value(self.w).numel() + store.value(self.b).numel()
    }
}
