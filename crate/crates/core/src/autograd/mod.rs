//! Minimal dense-tensor engine with reverse-mode differentiation.
//!
//! Values live on a [`Tape`]; building an op records the forward result and
//! enough context to replay its local backward rule. [`Tape::backward`]
//! sweeps the tape once in reverse, accumulating gradients into every
//! recorded tensor that requires them.

mod adam;
mod gradcheck;
mod ops;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::grad_check;
pub use tape::{Tape, TensorId};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutogradError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("tensor id {0} is not on this tape")]
    InvalidTensor(usize),
    #[error("cross entropy: every position is ignored")]
    AllPositionsIgnored,
    #[error("cross entropy: target {target} out of vocabulary {vocab}")]
    TargetOutOfRange { target: usize, vocab: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
