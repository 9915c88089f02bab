//! Minimal rank-4 tensor engine with reverse-mode differentiation.
//!
//! Tensors are dense `B x C x H x W` buffers of `f32` (training) or
//! `f64` (gradient-check builds). A [`Graph`] records the forward pass
//! as a tape; [`Graph::backward`] walks it in reverse and accumulates
//! vector-Jacobian products. The graph is rebuilt per forward pass and
//! dropped after the backward pass.

mod checkpoint;
pub(crate) mod graph;
pub(crate) mod ops;
mod param;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use graph::{Activation, Graph, NodeId, UpsampleMode};
pub use param::{AdamConfig, ParamId, ParamStore, Parameter};

use std::fmt;

use crate::error::{Error, Result};

/// Element type of the engine: `f32` for training, `f64` for
/// finite-difference gradient checks.
pub trait Scalar:
    num_traits::Float
    + num_traits::NumAssign
    + Copy
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Dimensions of a rank-4 tensor.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Shape {
    pub b: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(b: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { b, c, h, w }
    }

    pub fn numel(&self) -> usize {
        self.b * self.c * self.h * self.w
    }

    /// Spatial plane size `H * W`.
    pub fn plane(&self) -> usize {
        self.h * self.w
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.b, self.c, self.h, self.w)
    }
}

/// Dense batched feature map `B x C x H x W`, row-major.
#[derive(Clone, PartialEq, Debug)]
pub struct Tensor4<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(shape: Shape) -> Self {
        assert!(shape.b > 0 && shape.c > 0 && shape.h > 0 && shape.w > 0, "shape dims must be positive");
        Tensor4 { shape, data: vec![T::zero(); shape.numel()] }
    }

    pub fn filled(shape: Shape, v: T) -> Self {
        Tensor4 { data: vec![v; shape.numel()], ..Tensor4::zeros(shape) }
    }

    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {shape}",
                data.len()
            )));
        }
        Ok(Tensor4 { shape, data })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut t = Tensor4::zeros(shape);
        for b in 0..shape.b {
            for c in 0..shape.c {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        *t.at_mut(b, c, h, w) = f(b, c, h, w);
                    }
                }
            }
        }
        t
    }

    /// 1x1x1x1 scalar tensor.
    pub fn scalar(v: T) -> Self {
        Tensor4 { shape: Shape::new(1, 1, 1, 1), data: vec![v] }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, b: usize, c: usize, h: usize, w: usize) -> usize {
        ((b * self.shape.c + c) * self.shape.h + h) * self.shape.w + w
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.index(b, c, h, w)]
    }

    #[inline]
    pub fn at_mut(&mut self, b: usize, c: usize, h: usize, w: usize) -> &mut T {
        let i = self.index(b, c, h, w);
        &mut self.data[i]
    }

    /// Contiguous `H*W` slice for one (sample, channel) plane.
    pub fn plane(&self, b: usize, c: usize) -> &[T] {
        let start = (b * self.shape.c + c) * self.shape.plane();
        &self.data[start..start + self.shape.plane()]
    }

    pub fn plane_mut(&mut self, b: usize, c: usize) -> &mut [T] {
        let p = self.shape.plane();
        let start = (b * self.shape.c + c) * p;
        &mut self.data[start..start + p]
    }

    /// The single element of a 1x1x1x1 tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.numel(), 1, "item() requires a scalar tensor");
        self.data[0]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor4 { shape: self.shape, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), |m, d| if d > m { d } else { m })
    }

    /// Stack single-sample tensors along the batch axis.
    pub fn concat_batch(items: &[&Tensor4<T>]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::Usage("concat_batch of empty list".into()))?;
        let s = first.shape;
        let total_b: usize = items.iter().map(|t| t.shape.b).sum();
        let mut out = Tensor4::zeros(Shape::new(total_b, s.c, s.h, s.w));
        let mut off = 0;
        for t in items {
            if t.shape.c != s.c || t.shape.h != s.h || t.shape.w != s.w {
                return Err(Error::Shape(format!(
                    "concat_batch shape {} incompatible with {}",
                    t.shape, s
                )));
            }
            out.data[off..off + t.numel()].copy_from_slice(&t.data);
            off += t.numel();
        }
        Ok(out)
    }

    /// Cast between scalar types through f64.
    pub fn cast<U: Scalar>(&self) -> Tensor4<U> {
        Tensor4 {
            shape: self.shape,
            data: self.data.iter().map(|&x| U::from_f64(x.to_f64())).collect(),
        }
    }
}
