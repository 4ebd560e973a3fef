//! Classical baselines: correlation ghost imaging and compressed sensing in
//! an orthonormal 2-D DCT basis.

mod cgi;
mod cs;
mod dct;

pub use cgi::{cgi_reconstruct, CgiResult};
pub use cs::{cs_reconstruct, CsConfig, CsResult};
pub use dct::{dct2, idct2, DctBasis};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
