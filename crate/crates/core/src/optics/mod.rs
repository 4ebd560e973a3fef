//! Illumination pattern synthesis and the simulated bucket detector.

mod bucket;
mod fft2;
mod speckle;
mod spectrum;

pub use bucket::{add_noise, compute_bucket_signals, normalize_buckets, BucketSequence};
pub use speckle::{gen_pink_speckles, gen_rayleigh_speckles, PatternStack, SpeckleKind};
pub use spectrum::{radial_power_slope, radial_power_spectrum, speckle_contrast};



use thiserror::Error;

#[derive(Debug, Error)]
pub enum OpticsError {
    #[error("speckle grain too large: Fourier disk radius {radius:.3} < 1 pixel")]
    GrainTooLarge { radius: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cannot normalize a constant bucket sequence")]
    ConstantSequence,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
