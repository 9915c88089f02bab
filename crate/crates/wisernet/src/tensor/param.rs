//! Named, persistently stored parameters with Adam optimizer state.

use super::{Scalar, Tensor4};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone)]
pub struct Parameter<T: Scalar> {
    pub name: String,
    pub value: Tensor4<T>,
    /// Accumulated gradient; `None` until the first backward pass after
    /// `zero_grads`.
    pub grad: Option<Tensor4<T>>,
    m: Tensor4<T>,
    v: Tensor4<T>,
    step: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// All learnable tensors of a model, in declaration order. Declaration
/// order is the checkpoint order.
#[derive(Clone, Default)]
pub struct ParamStore<T: Scalar> {
    params: Vec<Parameter<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor4<T>) -> ParamId {
        let shape = value.shape();
        self.params.push(Parameter {
            name: name.into(),
            value,
            grad: None,
            m: Tensor4::zeros(shape),
            v: Tensor4::zeros(shape),
            step: 0,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Tensor4<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor4<T> {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> Option<&Tensor4<T>> {
        self.params[id.0].grad.as_ref()
    }

    pub fn step_count(&self, id: ParamId) -> u64 {
        self.params[id.0].step
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn total_elements(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, g: &Tensor4<T>) {
        let p = &mut self.params[id.0];
        match &mut p.grad {
            Some(acc) => {
                for (a, &v) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *a += v;
                }
            }
            slot => *slot = Some(g.clone()),
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    /// Standard Adam with bias correction, applied in place. Every
    /// parameter must carry a gradient.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        for p in &self.params {
            if p.grad.is_none() {
                return Err(Error::Usage(format!(
                    "adam_step: parameter '{}' has no gradient",
                    p.name
                )));
            }
        }
        let (b1, b2) = (T::from_f64(cfg.beta1), T::from_f64(cfg.beta2));
        let one = T::one();
        let eps = T::from_f64(cfg.eps);
        for p in &mut self.params {
            p.step += 1;
            let t = p.step as i32;
            let corr1 = one - b1.powi(t);
            let corr2 = one - b2.powi(t);
            let lr = T::from_f64(cfg.lr);
            let g = p.grad.as_ref().unwrap().as_slice();
            for i in 0..g.len() {
                let gi = g[i];
                let m = &mut p.m.as_mut_slice()[i];
                *m = b1 * *m + (one - b1) * gi;
                let mhat = *m / corr1;
                let v = &mut p.v.as_mut_slice()[i];
                *v = b2 * *v + (one - b2) * gi * gi;
                let vhat = *v / corr2;
                p.value.as_mut_slice()[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Snapshot of the current values (for best-model tracking).
    pub fn values_snapshot(&self) -> Vec<Tensor4<T>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore_values(&mut self, snapshot: &[Tensor4<T>]) {
        assert_eq!(snapshot.len(), self.params.len());
        for (p, v) in self.params.iter_mut().zip(snapshot) {
            p.value = v.clone();
        }
    }

    /// Cast values (not optimizer state) into a fresh store of another
    /// precision; used by the f64 gradient-check builds.
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        for p in &self.params {
            out.register(p.name.clone(), p.value.cast::<U>());
        }
        out
    }
}
