//! Minimal dense network core: tensors, reverse-mode layer gradients,
//! softmax cross-entropy, triplet margin loss and Adam.

mod checkpoint;
mod mlp;
pub mod ops;
mod params;
mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use mlp::{Mlp, MlpTrace};
pub use ops::{dense, dense_backward, relu, softmax, softmax_xent, triplet_margin, TripletGrads};
pub use params::{adam_step, AdamConfig, ParamId, ParamStore};
pub use tensor::{SparseVec, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("unknown parameter {0}")]
    UnknownParam(String),
    #[error("{0}")]
    Invalid(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config fingerprint mismatch: expected {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
