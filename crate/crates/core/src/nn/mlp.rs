use rand::Rng;

use super::ops::{dense, dense_backward, relu, relu_backward, sparse_dense, sparse_dense_backward};
use super::{NnError, ParamId, ParamStore, SparseVec};
use crate::num::Scalar;

/// Fully connected ReLU network with a linear output layer.
///
/// The first layer consumes a [`SparseVec`]; the remaining layers are dense.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<(ParamId, ParamId)>,
    sizes: Vec<usize>,
}

/// Activations saved by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace<S> {
    input: SparseVec<S>,
    /// Post-activation output of every layer; the last entry is the network output.
    acts: Vec<Vec<S>>,
}

impl<S> MlpTrace<S> {
    pub fn output(&self) -> &[S] {
        self.acts.last().expect("at least one layer")
    }
}

impl Mlp {
    /// Registers `prefix.w{i}` / `prefix.b{i}` for each layer.
    ///
    /// Weights are drawn uniformly with a fan-in scaled bound (He for layers
    /// followed by ReLU, LeCun for the output layer); biases start at zero.
    pub fn new<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        prefix: &str,
        sizes: &[usize],
        rng: &mut R,
    ) -> Result<Self, NnError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NnError::Invalid(format!("bad layer sizes {sizes:?}")));
        }
        let mut layers = Vec::new();
        let n = sizes.len() - 1;
        for i in 0..n {
            let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
            let gain = if i + 1 < n { 6.0 } else { 3.0 };
            let bound = (gain / fan_in as f64).sqrt();
            let w = store.insert_uniform(&format!("{prefix}.w{i}"), &[fan_in, fan_out], bound, rng)?;
            let b = store.insert(&format!("{prefix}.b{i}"), super::Tensor::zeros(&[fan_out]))?;
            layers.push((w, b));
        }
        Ok(Mlp {
            layers,
            sizes: sizes.to_vec(),
        })
    }

    /// Re-attaches to parameters already present in `store` (e.g. after loading).
    pub fn attach<S: Scalar>(store: &ParamStore<S>, prefix: &str, sizes: &[usize]) -> Result<Self, NnError> {
        let mut layers = Vec::new();
        for i in 0..sizes.len().saturating_sub(1) {
            let get = |name: String| store.id(&name).ok_or(NnError::UnknownParam(name));
            let w = get(format!("{prefix}.w{i}"))?;
            let b = get(format!("{prefix}.b{i}"))?;
            if store.param(w).shape() != [sizes[i], sizes[i + 1]] {
                return Err(NnError::ShapeMismatch {
                    op: "attach",
                    left: vec![sizes[i], sizes[i + 1]],
                    right: store.param(w).shape().to_vec(),
                });
            }
            layers.push((w, b));
        }
        Ok(Mlp {
            layers,
            sizes: sizes.to_vec(),
        })
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn forward<S: Scalar>(&self, store: &ParamStore<S>, input: SparseVec<S>) -> Result<MlpTrace<S>, NnError> {
        let n = self.layers.len();
        let mut acts: Vec<Vec<S>> = Vec::with_capacity(n);
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let pre = match acts.last() {
                None => sparse_dense(&input, store.param(w), store.param(b))?,
                Some(x) => dense(x, store.param(w), store.param(b))?,
            };
            acts.push(if i + 1 < n { relu(&pre) } else { pre });
        }
        Ok(MlpTrace { input, acts })
    }

    /// Output only, no trace kept beyond the call.
    pub fn infer<S: Scalar>(&self, store: &ParamStore<S>, input: SparseVec<S>) -> Result<Vec<S>, NnError> {
        let mut t = self.forward(store, input)?;
        Ok(t.acts.pop().expect("at least one layer"))
    }

    /// Accumulates parameter gradients for `d loss / d output = dout`.
    /// Returns the gradient of each stored input entry if requested.
    pub fn backward<S: Scalar>(
        &self,
        store: &mut ParamStore<S>,
        trace: &MlpTrace<S>,
        dout: &[S],
        want_input_grad: bool,
    ) -> Result<Option<Vec<S>>, NnError> {
        let n = self.layers.len();
        let mut delta = dout.to_vec();
        for i in (0..n).rev() {
            if i + 1 < n {
                delta = relu_backward(&trace.acts[i], &delta);
            }
            let (w, b) = self.layers[i];
            let (wt, gw, gb) = store.split_mut(w, b);
            if i == 0 {
                return sparse_dense_backward(&trace.input, wt, &delta, gw, gb, want_input_grad);
            }
            delta = dense_backward(&trace.acts[i - 1], wt, &delta, gw, gb)?;
        }
        unreachable!("network has at least one layer")
    }
}
