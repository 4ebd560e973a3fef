//! Ghost translation: a sequence-to-sequence transformer that maps a 1-D
//! bucket-signal sequence to the list of lit pixel indices of the object.

mod checkpoint;
mod model;
mod token;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use model::{Model, ModelConfig};
pub use token::{batch_pad, detokenize, tokenize_image, PaddedBatch, TokenSeq};
pub use train::{train, TrainConfig, TrainReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TranslatorError {
    #[error("image is not binary")]
    NonBinaryImage,
    #[error("token {token} out of range for vocabulary {vocab}")]
    TokenOutOfRange { token: usize, vocab: usize },
    #[error("invalid token sequence: {0}")]
    InvalidTokenSequence(String),
    #[error("source of {len} readings exceeds maximum {max}")]
    SourceTooLong { len: usize, max: usize },
    #[error("target of {len} tokens exceeds maximum {max}")]
    TargetTooLong { len: usize, max: usize },
    #[error("source length {len} does not match the trained length {expected}")]
    SourceLengthMismatch { len: usize, expected: usize },
    #[error("bucket sequences of mixed lengths in dataset ({0} vs {1})")]
    MixedSourceLengths(usize, usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint version mismatch: found {found:?}")]
    VersionMismatch { found: String },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Autograd(#[from] crate::autograd::AutogradError),
}
