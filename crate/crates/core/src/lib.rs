//! Desk-scale computational ghost imaging.
//!
//! The crate simulates single-pixel (bucket) measurements of binary objects
//! under speckle illumination and reconstructs the objects three ways:
//! classical correlation imaging, compressed sensing in a DCT basis, and a
//! sequence-to-sequence transformer that translates the 1-D bucket signal
//! into the set of lit pixel indices.
//!
//! All numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the `*64` aliases below are what the CLI pipeline uses.

pub mod autograd;
pub mod data;
mod linalg;
pub mod metrics;
pub mod optics;
pub mod recon;
pub mod scalar;
pub mod translator;

pub use scalar::{Dtype, Scalar};

/// Default scalar for experiments; gradient checks and the reference
/// pipeline both want the f64 headroom.
pub type Real = f64;

pub type Image64 = data::Image<Real>;
pub type ImageSet64 = data::ImageSet<Real>;
pub type PatternStack64 = optics::PatternStack<Real>;
pub type BucketSequence64 = optics::BucketSequence<Real>;
pub type Tape64 = autograd::Tape<Real>;
pub type Model64 = translator::Model<Real>;
