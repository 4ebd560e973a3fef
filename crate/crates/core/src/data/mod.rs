//! Core value types, dataset ingestion and the on-disk container format.

mod container;
mod idx;
mod image;
mod pgm;

pub use container::{load_container, save_container, ContainerMeta};
pub use idx::{load_idx, load_idx_images, load_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use image::{preprocess, Image, ImageSet, SamplingConfig, Split};
pub use pgm::write_pgm;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad IDX magic number: found 0x{0:08x}")]
    BadMagic(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty image set")]
    EmptySet,
    #[error("container header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("container checksum mismatch: header 0x{header:08x}, payload 0x{payload:08x}")]
    ChecksumMismatch { header: u32, payload: u32 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("pixel value {value} outside [0,1] at index {index}")]
    PixelOutOfRange { index: usize, value: f64 },
}
