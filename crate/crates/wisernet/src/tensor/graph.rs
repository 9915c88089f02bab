//! Wengert tape: forward ops append nodes, backward walks them in
//! reverse. One graph per forward pass; dropping it frees every
//! intermediate.

use super::ops;
use super::param::{ParamId, ParamStore};
use super::{Scalar, Shape, Tensor4};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NodeId(pub(crate) usize);

/// Backward rule of one recorded op: maps the output gradient to one
/// gradient per parent, in parent order.
pub(crate) trait VjpOp<T: Scalar> {
    fn vjp(
        &self,
        out_grad: &Tensor4<T>,
        out_value: &Tensor4<T>,
        inputs: &[&Tensor4<T>],
    ) -> Vec<Tensor4<T>>;
}

struct Node<T: Scalar> {
    value: Tensor4<T>,
    parents: Vec<NodeId>,
    op: Option<Box<dyn VjpOp<T>>>,
    requires_grad: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum UpsampleMode {
    Nearest,
    Bilinear,
}

pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor4<T>>>,
    bound_params: Vec<(ParamId, NodeId)>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), grads: Vec::new(), bound_params: Vec::new() }
    }

    pub(crate) fn push(
        &mut self,
        value: Tensor4<T>,
        parents: Vec<NodeId>,
        op: Option<Box<dyn VjpOp<T>>>,
    ) -> NodeId {
        let requires_grad = op.is_some() && parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node { value, parents, op, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    /// Input leaf. `requires_grad` leaves receive a gradient buffer
    /// during backward.
    pub fn leaf(&mut self, value: Tensor4<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { value, parents: Vec::new(), op: None, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    /// Non-differentiable constant.
    pub fn constant(&mut self, value: Tensor4<T>) -> NodeId {
        self.leaf(value, false)
    }

    /// Bind a stored parameter as a differentiable leaf. Its gradient
    /// is pushed back with [`Graph::accumulate_param_grads`].
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> NodeId {
        let node = self.leaf(store.value(id).clone(), true);
        self.bound_params.push((id, node));
        node
    }

    pub fn value(&self, id: NodeId) -> &Tensor4<T> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> Shape {
        self.nodes[id.0].value.shape()
    }

    /// Gradient of the last `backward` call with respect to node `id`.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor4<T>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Bytes held by all forward activations currently on the tape.
    pub fn activation_bytes(&self) -> usize {
        self.nodes.iter().map(|n| n.value.numel() * std::mem::size_of::<T>()).sum()
    }

    /// Reverse sweep from a scalar root. Gradients accumulate by
    /// summation when a node feeds several consumers.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let root = &self.nodes[loss.0];
        if root.value.numel() != 1 {
            return Err(Error::Usage(format!(
                "backward root must be scalar, got {}",
                root.value.shape()
            )));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor4::scalar(T::one()));
        for i in (0..=loss.0).rev() {
            if self.grads[i].is_none() || !self.nodes[i].requires_grad {
                continue;
            }
            let Some(op) = self.nodes[i].op.as_ref() else { continue };
            let out_grad = self.grads[i].as_ref().unwrap();
            let inputs: Vec<&Tensor4<T>> =
                self.nodes[i].parents.iter().map(|p| &self.nodes[p.0].value).collect();
            let parent_grads = op.vjp(out_grad, &self.nodes[i].value, &inputs);
            debug_assert_eq!(parent_grads.len(), self.nodes[i].parents.len());
            let parents = self.nodes[i].parents.clone();
            for (p, g) in parents.into_iter().zip(parent_grads) {
                if !self.nodes[p.0].requires_grad {
                    continue;
                }
                match &mut self.grads[p.0] {
                    Some(acc) => {
                        for (a, &v) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
                            *a += v;
                        }
                    }
                    slot => *slot = Some(g),
                }
            }
        }
        Ok(())
    }

    /// Add the gradients of bound parameter leaves into the store.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore<T>) {
        for &(pid, node) in &self.bound_params {
            if let Some(g) = self.grad(node) {
                store.accumulate_grad(pid, g);
            }
        }
    }

    // -- op builders --------------------------------------------------------

    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    ) -> Result<NodeId> {
        let out = ops::conv2d_fwd(
            self.value(x),
            self.value(w),
            self.value(b),
            stride,
            pad,
        )?;
        Ok(self.push(out, vec![x, w, b], Some(Box::new(Conv2dOp { stride, pad }))))
    }

    pub fn instance_norm(&mut self, x: NodeId, eps: f64) -> NodeId {
        let out = ops::instance_norm_fwd(self.value(x), eps);
        self.push(out, vec![x], Some(Box::new(InstanceNormOp { eps })))
    }

    pub fn activation(&mut self, x: NodeId, kind: Activation) -> NodeId {
        match kind {
            Activation::Relu => {
                let out = ops::relu_fwd(self.value(x));
                self.push(out, vec![x], Some(Box::new(ReluOp)))
            }
            Activation::Sigmoid => {
                let out = ops::sigmoid_fwd(self.value(x));
                self.push(out, vec![x], Some(Box::new(SigmoidOp)))
            }
        }
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.activation(x, Activation::Relu)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.activation(x, Activation::Sigmoid)
    }

    pub fn upsample(&mut self, x: NodeId, factor: usize, mode: UpsampleMode) -> Result<NodeId> {
        if factor < 1 {
            return Err(Error::Usage("upsample factor must be >= 1".into()));
        }
        if factor == 1 {
            let out = self.value(x).clone();
            return Ok(self.push(out, vec![x], Some(Box::new(IdentityOp))));
        }
        let out = match mode {
            UpsampleMode::Nearest => ops::upsample_nearest_fwd(self.value(x), factor),
            UpsampleMode::Bilinear => ops::upsample_bilinear_fwd(self.value(x), factor),
        };
        Ok(self.push(out, vec![x], Some(Box::new(UpsampleOp { factor, mode }))))
    }

    /// Global average pool to `B x C x 1 x 1`.
    pub fn global_avg_pool(&mut self, x: NodeId) -> NodeId {
        let out = ops::spatial_mean_fwd(self.value(x));
        self.push(out, vec![x], Some(Box::new(SpatialMeanOp)))
    }

    pub fn spatial_sum(&mut self, x: NodeId) -> NodeId {
        let out = ops::spatial_sum_fwd(self.value(x));
        self.push(out, vec![x], Some(Box::new(SpatialSumOp)))
    }

    pub fn spatial_min(&mut self, x: NodeId) -> NodeId {
        let out = ops::spatial_min_fwd(self.value(x));
        self.push(out, vec![x], Some(Box::new(SpatialExtremumOp { take_max: false })))
    }

    pub fn spatial_max(&mut self, x: NodeId) -> NodeId {
        let out = ops::spatial_max_fwd(self.value(x));
        self.push(out, vec![x], Some(Box::new(SpatialExtremumOp { take_max: true })))
    }

    pub fn channel_mean(&mut self, x: NodeId) -> NodeId {
        let c = self.shape(x).c;
        let sum = ops::channel_sum_fwd(self.value(x));
        let out = sum.map(|v| v / T::from_f64(c as f64));
        self.push(out, vec![x], Some(Box::new(ChannelReduceOp { mean: true })))
    }

    pub fn channel_sum(&mut self, x: NodeId) -> NodeId {
        let out = ops::channel_sum_fwd(self.value(x));
        self.push(out, vec![x], Some(Box::new(ChannelReduceOp { mean: false })))
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let out = ops::mean_all_fwd(self.value(x));
        self.push(out, vec![x], Some(Box::new(MeanAllOp)))
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let out = ops::sum_all_fwd(self.value(x));
        self.push(out, vec![x], Some(Box::new(SumAllOp)))
    }

    fn binary(&mut self, lhs: NodeId, rhs: NodeId, kind: BinaryKind) -> Result<NodeId> {
        let ls = self.shape(lhs);
        let rs = self.shape(rhs);
        if !ops::broadcast_ok(ls, rs) {
            return Err(Error::Shape(format!(
                "binary op: rhs {} does not broadcast over lhs {}",
                rs, ls
            )));
        }
        let out = ops::broadcast_binary_fwd(self.value(lhs), self.value(rhs), |a, b| match kind {
            BinaryKind::Add => a + b,
            BinaryKind::Sub => a - b,
            BinaryKind::Mul => a * b,
            BinaryKind::Div => a / b,
        });
        Ok(self.push(out, vec![lhs, rhs], Some(Box::new(BinaryOp { kind }))))
    }

    /// Elementwise; `rhs` may be 1 along any axis.
    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        self.binary(lhs, rhs, BinaryKind::Add)
    }

    pub fn sub(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        self.binary(lhs, rhs, BinaryKind::Sub)
    }

    pub fn mul(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        self.binary(lhs, rhs, BinaryKind::Mul)
    }

    pub fn div(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        self.binary(lhs, rhs, BinaryKind::Div)
    }

    /// `a * x + b` with scalar constants.
    pub fn affine(&mut self, x: NodeId, a: f64, b: f64) -> NodeId {
        let (av, bv) = (T::from_f64(a), T::from_f64(b));
        let out = self.value(x).map(|v| av * v + bv);
        self.push(out, vec![x], Some(Box::new(AffineOp { a })))
    }

    pub fn abs(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(|v| v.abs());
        self.push(out, vec![x], Some(Box::new(AbsOp)))
    }

    /// Elementwise square root; derivative at 0 is defined as 0.
    pub fn sqrt(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(|v| v.sqrt());
        self.push(out, vec![x], Some(Box::new(SqrtOp)))
    }

    pub fn concat_channels(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let values: Vec<&Tensor4<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let out = ops::concat_channels_fwd(&values)?;
        let widths = parts.iter().map(|&p| self.shape(p).c).collect();
        Ok(self.push(out, parts.to_vec(), Some(Box::new(ConcatChannelsOp { widths }))))
    }

    pub fn channel_slice(&mut self, x: NodeId, from: usize, len: usize) -> Result<NodeId> {
        let s = self.shape(x);
        if from + len > s.c {
            return Err(Error::Shape(format!(
                "channel_slice [{from}, {}) out of {} channels",
                from + len,
                s.c
            )));
        }
        let out = ops::channel_slice_fwd(self.value(x), from, len);
        Ok(self.push(out, vec![x], Some(Box::new(ChannelSliceOp { from }))))
    }

    /// Replicate-pad right/bottom edges.
    pub fn pad_edge(&mut self, x: NodeId, pad_h: usize, pad_w: usize) -> NodeId {
        let out = ops::pad_edge_fwd(self.value(x), pad_h, pad_w);
        self.push(out, vec![x], Some(Box::new(PadEdgeOp)))
    }

    /// Keep the top-left `h x w` window.
    pub fn crop(&mut self, x: NodeId, h: usize, w: usize) -> Result<NodeId> {
        let s = self.shape(x);
        if h > s.h || w > s.w {
            return Err(Error::Shape(format!("crop {h}x{w} exceeds {}", s)));
        }
        let out = ops::crop_fwd(self.value(x), h, w);
        Ok(self.push(out, vec![x], Some(Box::new(CropOp))))
    }
}

// ---------------------------------------------------------------------------
// op structs

#[derive(Clone, Copy)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

struct Conv2dOp {
    stride: usize,
    pad: usize,
}

impl<T: Scalar> VjpOp<T> for Conv2dOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        let (x, w) = (inputs[0], inputs[1]);
        vec![
            ops::conv2d_bwd_x(g, x.shape(), w, self.stride, self.pad),
            ops::conv2d_bwd_w(g, x, w.shape(), self.stride, self.pad),
            ops::conv2d_bwd_b(g),
        ]
    }
}

struct InstanceNormOp {
    eps: f64,
}

impl<T: Scalar> VjpOp<T> for InstanceNormOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![ops::instance_norm_bwd(g, inputs[0], self.eps)]
    }
}

struct ReluOp;

impl<T: Scalar> VjpOp<T> for ReluOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![ops::relu_bwd(g, inputs[0])]
    }
}

struct SigmoidOp;

impl<T: Scalar> VjpOp<T> for SigmoidOp {
    fn vjp(&self, g: &Tensor4<T>, out: &Tensor4<T>, _inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![ops::sigmoid_bwd(g, out)]
    }
}

struct IdentityOp;

impl<T: Scalar> VjpOp<T> for IdentityOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, _inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![g.clone()]
    }
}

struct UpsampleOp {
    factor: usize,
    mode: UpsampleMode,
}

impl<T: Scalar> VjpOp<T> for UpsampleOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, _inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![match self.mode {
            UpsampleMode::Nearest => ops::upsample_nearest_bwd(g, self.factor),
            UpsampleMode::Bilinear => ops::upsample_bilinear_bwd(g, self.factor),
        }]
    }
}

struct SpatialMeanOp;

impl<T: Scalar> VjpOp<T> for SpatialMeanOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        let s = inputs[0].shape();
        vec![ops::spatial_reduce_bwd(g, s, T::from_f64(1.0 / s.plane() as f64))]
    }
}

struct SpatialSumOp;

impl<T: Scalar> VjpOp<T> for SpatialSumOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![ops::spatial_reduce_bwd(g, inputs[0].shape(), T::one())]
    }
}

struct SpatialExtremumOp {
    take_max: bool,
}

impl<T: Scalar> VjpOp<T> for SpatialExtremumOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![ops::spatial_extremum_bwd(g, inputs[0], self.take_max)]
    }
}

struct ChannelReduceOp {
    mean: bool,
}

impl<T: Scalar> VjpOp<T> for ChannelReduceOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        let s = inputs[0].shape();
        let scale = if self.mean { T::from_f64(1.0 / s.c as f64) } else { T::one() };
        vec![ops::channel_sum_bwd(g, s, scale)]
    }
}

struct MeanAllOp;

impl<T: Scalar> VjpOp<T> for MeanAllOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![ops::mean_all_bwd(g, inputs[0].shape())]
    }
}

struct SumAllOp;

impl<T: Scalar> VjpOp<T> for SumAllOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![Tensor4::filled(inputs[0].shape(), g.item())]
    }
}

struct BinaryOp {
    kind: BinaryKind,
}

impl<T: Scalar> VjpOp<T> for BinaryOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        let (lhs, rhs) = (inputs[0], inputs[1]);
        let rs = rhs.shape();
        match self.kind {
            BinaryKind::Add => vec![g.clone(), ops::reduce_to_shape(g, rs)],
            BinaryKind::Sub => {
                let gr = ops::reduce_to_shape(g, rs).map(|v| -v);
                vec![g.clone(), gr]
            }
            BinaryKind::Mul => {
                let gl = ops::broadcast_binary_fwd(g, rhs, |a, b| a * b);
                let gr = ops::mul_reduce_to_shape(g, lhs, rs, |gv, lv| gv * lv);
                vec![gl, gr]
            }
            BinaryKind::Div => {
                let gl = ops::broadcast_binary_fwd(g, rhs, |a, b| a / b);
                let mut gl_times_l = ops::broadcast_binary_fwd(g, rhs, |a, b| a / (b * b));
                for (o, &lv) in gl_times_l.as_mut_slice().iter_mut().zip(lhs.as_slice()) {
                    *o = -(*o * lv);
                }
                let gr = ops::reduce_to_shape(&gl_times_l, rs);
                vec![gl, gr]
            }
        }
    }
}

struct AffineOp {
    a: f64,
}

impl<T: Scalar> VjpOp<T> for AffineOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, _inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        let a = T::from_f64(self.a);
        vec![g.map(|v| a * v)]
    }
}

struct AbsOp;

impl<T: Scalar> VjpOp<T> for AbsOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        let mut gx = g.clone();
        for (o, &xv) in gx.as_mut_slice().iter_mut().zip(inputs[0].as_slice()) {
            if xv < T::zero() {
                *o = -*o;
            } else if xv == T::zero() {
                *o = T::zero();
            }
        }
        vec![gx]
    }
}

struct SqrtOp;

impl<T: Scalar> VjpOp<T> for SqrtOp {
    fn vjp(&self, g: &Tensor4<T>, out: &Tensor4<T>, _inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        let half = T::from_f64(0.5);
        let mut gx = g.clone();
        for (o, &yv) in gx.as_mut_slice().iter_mut().zip(out.as_slice()) {
            *o = if yv > T::zero() { *o * half / yv } else { T::zero() };
        }
        vec![gx]
    }
}

struct ConcatChannelsOp {
    widths: Vec<usize>,
}

impl<T: Scalar> VjpOp<T> for ConcatChannelsOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, _inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        let mut grads = Vec::with_capacity(self.widths.len());
        let mut from = 0;
        for &w in &self.widths {
            grads.push(ops::channel_slice_fwd(g, from, w));
            from += w;
        }
        grads
    }
}

struct ChannelSliceOp {
    from: usize,
}

impl<T: Scalar> VjpOp<T> for ChannelSliceOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![ops::channel_slice_bwd(g, inputs[0].shape(), self.from)]
    }
}

struct PadEdgeOp;

impl<T: Scalar> VjpOp<T> for PadEdgeOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![ops::pad_edge_bwd(g, inputs[0].shape())]
    }
}

struct CropOp;

impl<T: Scalar> VjpOp<T> for CropOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        vec![ops::crop_bwd(g, inputs[0].shape())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gradient_is_all_ones() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor4::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, -2.0, 3.0, 0.5]).unwrap(), true);
        let s = g.sum_all(x);
        g.backward(s).unwrap();
        assert!(g.grad(x).unwrap().as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn quadratic_gradient_is_input() {
        let mut g = Graph::new();
        let t = Tensor4::from_vec(Shape::new(1, 2, 1, 2), vec![0.5, -1.5, 2.0, 4.0]).unwrap();
        let x = g.leaf(t.clone(), true);
        let sq = g.mul(x, x).unwrap();
        let s = g.sum_all(sq);
        let half = g.affine(s, 0.5, 0.0);
        g.backward(half).unwrap();
        assert_eq!(g.grad(x).unwrap(), &t);
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor4::<f64>::zeros(Shape::new(1, 1, 2, 2)), true);
        assert!(matches!(g.backward(x), Err(crate::error::Error::Usage(_))));
    }

    #[test]
    fn grad_accumulates_over_shared_consumers() {
        // y = x + x => dy/dx = 2
        let mut g = Graph::new();
        let x = g.leaf(Tensor4::scalar(3.0f64), true);
        let y = g.add(x, x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 2.0);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor4::scalar(1.0f64), true);
        let c = g.constant(Tensor4::scalar(5.0f64));
        let y = g.mul(x, c).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 5.0);
        assert!(g.grad(c).is_none());
    }
}
