use rand::Rng;

use super::{NnError, Tensor};
use crate::num::Scalar;

/// Handle to a parameter registered in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named parameters with gradient accumulators and Adam moment buffers.
///
/// Forward passes borrow the store immutably; `backward` and [`adam_step`]
/// need exclusive access.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<S> {
    names: Vec<String>,
    params: Vec<Tensor<S>>,
    grads: Vec<Tensor<S>>,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
    step: u64,
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            params: Vec::new(),
            grads: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
        }
    }

    pub fn insert(&mut self, name: &str, value: Tensor<S>) -> Result<ParamId, NnError> {
        if self.names.iter().any(|n| n == name) {
            return Err(NnError::Invalid(format!("duplicate parameter {name}")));
        }
        let shape = value.shape().to_vec();
        self.names.push(name.to_string());
        self.params.push(value);
        self.grads.push(Tensor::zeros(&shape));
        self.m.push(Tensor::zeros(&shape));
        self.v.push(Tensor::zeros(&shape));
        Ok(ParamId(self.names.len() - 1))
    }

    /// Uniform `[-bound, bound]` initialisation.
    pub fn insert_uniform<R: Rng>(
        &mut self,
        name: &str,
        shape: &[usize],
        bound: f64,
        rng: &mut R,
    ) -> Result<ParamId, NnError> {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| S::of(rng.gen_range(-bound..=bound))).collect();
        self.insert(name, Tensor::from_vec(shape, data)?)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn param(&self, id: ParamId) -> &Tensor<S> {
        &self.params[id.0]
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.params[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<S> {
        &self.grads[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.grads[id.0]
    }

    pub(crate) fn split_mut(&mut self, w: ParamId, b: ParamId) -> (&Tensor<S>, &mut Tensor<S>, &mut Tensor<S>) {
        assert_ne!(w, b);
        let (gw, gb) = if w.0 < b.0 {
            let (lo, hi) = self.grads.split_at_mut(b.0);
            (&mut lo[w.0], &mut hi[0])
        } else {
            let (lo, hi) = self.grads.split_at_mut(w.0);
            (&mut hi[0], &mut lo[b.0])
        };
        (&self.params[w.0], gw, gb)
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(Tensor::fill_zero);
    }

    pub fn grads_finite(&self) -> bool {
        self.grads.iter().all(Tensor::is_finite)
    }

    pub fn params_finite(&self) -> bool {
        self.params.iter().all(Tensor::is_finite)
    }

    pub fn moments(&self, id: ParamId) -> (&Tensor<S>, &Tensor<S>) {
        (&self.m[id.0], &self.v[id.0])
    }

    /// Rebuilds a store from serialized parts; shapes must agree entry-wise.
    pub fn from_parts(
        entries: Vec<(String, Tensor<S>, Tensor<S>, Tensor<S>)>,
        step: u64,
    ) -> Result<Self, NnError> {
        let mut store = ParamStore::new();
        for (name, p, m, v) in entries {
            if m.shape() != p.shape() || v.shape() != p.shape() {
                return Err(NnError::ShapeMismatch {
                    op: "checkpoint",
                    left: p.shape().to_vec(),
                    right: m.shape().to_vec(),
                });
            }
            let id = store.insert(&name, p)?;
            store.m[id.0] = m;
            store.v[id.0] = v;
        }
        store.step = step;
        Ok(store)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update from the accumulated gradients, which are
/// then zeroed.
pub fn adam_step<S: Scalar>(store: &mut ParamStore<S>, cfg: &AdamConfig) {
    store.step += 1;
    let t = store.step as i32;
    let b1 = S::of(cfg.beta1);
    let b2 = S::of(cfg.beta2);
    let one = S::one();
    let bc1 = one - b1.powi(t);
    let bc2 = one - b2.powi(t);
    let lr = S::of(cfg.lr);
    let eps = S::of(cfg.eps);
    let (c1, c2) = (one - b1, one - b2);
    for i in 0..store.params.len() {
        let p = store.params[i].data_mut();
        let g = store.grads[i].data_mut();
        let m = store.m[i].data_mut();
        let v = store.v[i].data_mut();
        for (((p, g), m), v) in p.iter_mut().zip(g.iter_mut()).zip(m.iter_mut()).zip(v.iter_mut()) {
            let gj = *g;
            *m = b1 * *m + c1 * gj;
            *v = b2 * *v + c2 * gj * gj;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *p = *p - lr * mh / (vh.sqrt() + eps);
            *g = S::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[f64]) -> (ParamStore<f64>, ParamId) {
        let mut s = ParamStore::new();
        let id = s.insert("w", Tensor::from_vec(&[values.len()], values.to_vec()).unwrap()).unwrap();
        (s, id)
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let (mut s, id) = store_with(&[1.0, -2.0, 3.0]);
        let before = s.param(id).clone();
        for _ in 0..10 {
            adam_step(&mut s, &AdamConfig::default());
        }
        assert_eq!(s.param(id), &before);
    }

    #[test]
    fn constant_gradient_steps_at_lr() {
        let (mut s, id) = store_with(&[0.0, 0.0]);
        let cfg = AdamConfig::default();
        let mut last = s.param(id).data().to_vec();
        let mut delta = vec![0.0; 2];
        for _ in 0..1000 {
            s.grads[id.0].data_mut().copy_from_slice(&[0.37, -4.0]);
            adam_step(&mut s, &cfg);
            let now = s.param(id).data().to_vec();
            delta = now.iter().zip(&last).map(|(a, b)| a - b).collect();
            last = now;
        }
        assert!((delta[0].abs() - cfg.lr).abs() < 1e-3 * cfg.lr, "{delta:?}");
        assert!((delta[1].abs() - cfg.lr).abs() < 1e-3 * cfg.lr);
        assert!(delta[0] < 0.0 && delta[1] > 0.0);
    }

    #[test]
    fn step_zeroes_grads() {
        let (mut s, id) = store_with(&[1.0]);
        s.grads[id.0].data_mut()[0] = 2.0;
        adam_step(&mut s, &AdamConfig::default());
        assert_eq!(s.grad(id).data(), &[0.0]);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn duplicate_names_rejected() {
        let (mut s, _) = store_with(&[1.0]);
        assert!(s.insert("w", Tensor::zeros(&[1])).is_err());
    }
}
