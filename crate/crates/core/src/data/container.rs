//! Single-tensor container file: one UTF-8 header line followed by a raw
//! little-endian payload.
//!
//! ```text
//! GIC1 name=<name> dims=<d0>,<d1>,... dtype=<u8|f32|f64> seed=<u64> crc32=<hex> [key=value ...]
//! <payload bytes>
//! ```
//!
//! The header line carries generation metadata as extra `key=value` pairs;
//! keys are written in sorted order so identical inputs serialize to
//! identical bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::DataError;
use crate::scalar::{Dtype, Scalar};

const MAGIC: &str = "GIC1";

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerMeta {
    pub name: String,
    pub dims: Vec<usize>,
    pub dtype: Dtype,
    pub seed: u64,
    pub extra: BTreeMap<String, String>,
}

impl ContainerMeta {
    pub fn new(name: &str, dims: Vec<usize>, dtype: Dtype, seed: u64) -> Self {
        Self { name: name.to_string(), dims, dtype, seed, extra: BTreeMap::new() }
    }

    pub fn with_extra(mut self, key: &str, value: &str) -> Self {
        self.extra.insert(key.to_string(), value.to_string());
        self
    }

    pub fn payload_len(&self) -> usize {
        self.dims.iter().product::<usize>() * self.dtype.size_bytes()
    }

    /// Encodes `[0,1]` scalars as the payload for this meta's dtype.
    pub fn encode_scalars<S: Scalar>(values: &[S]) -> Vec<u8> {
        let mut out = Vec::with_capacity(values.len() * S::DTYPE.size_bytes());
        for &v in values {
            v.append_le_bytes(&mut out);
        }
        out
    }

    pub fn decode_scalars<S: Scalar>(payload: &[u8]) -> Result<Vec<S>, DataError> {
        let sz = S::DTYPE.size_bytes();
        if payload.len() % sz != 0 {
            return Err(DataError::HeaderMismatch(format!(
                "payload of {} bytes is not a multiple of element size {}",
                payload.len(),
                sz
            )));
        }
        Ok(payload.chunks_exact(sz).map(S::from_le_bytes_slice).collect())
    }
}

pub fn save_container(
    path: &Path,
    meta: &ContainerMeta,
    payload: &[u8],
) -> Result<(), DataError> {
    if payload.len() != meta.payload_len() {
        return Err(DataError::DimensionMismatch(format!(
            "payload is {} bytes but dims {:?} with dtype {} require {}",
            payload.len(),
            meta.dims,
            meta.dtype.tag(),
            meta.payload_len()
        )));
    }
    for (k, v) in &meta.extra {
        if k.contains(|c: char| c.is_whitespace() || c == '=')
            || v.contains(char::is_whitespace)
        {
            return Err(DataError::InvalidParameter(format!(
                "metadata entry {}={} contains whitespace or '='",
                k, v
            )));
        }
    }
    if meta.name.contains(char::is_whitespace) {
        return Err(DataError::InvalidParameter("container name contains whitespace".into()));
    }
    let crc = crc32fast::hash(payload);
    let dims = meta
        .dims
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let mut header = format!(
        "{} name={} dims={} dtype={} seed={} crc32={:08x}",
        MAGIC,
        meta.name,
        dims,
        meta.dtype.tag(),
        meta.seed,
        crc
    );
    for (k, v) in &meta.extra {
        header.push_str(&format!(" {}={}", k, v));
    }
    header.push('\n');

    let mut file = File::create(path)?;
    file.write_all(header.as_bytes())?;
    file.write_all(payload)?;
    Ok(())
}

pub fn load_container(path: &Path) -> Result<(ContainerMeta, Vec<u8>), DataError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;

    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| DataError::HeaderMismatch("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| DataError::HeaderMismatch("header is not UTF-8".into()))?;
    let payload = &bytes[newline + 1..];

    let mut fields = header.split(' ');
    let magic = fields.next().unwrap_or("");
    if magic != MAGIC {
        return Err(DataError::HeaderMismatch(format!("bad magic {:?}", magic)));
    }

    let mut name = None;
    let mut dims = None;
    let mut dtype = None;
    let mut seed = None;
    let mut crc = None;
    let mut extra = BTreeMap::new();
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| DataError::HeaderMismatch(format!("malformed field {:?}", field)))?;
        match key {
            "name" => name = Some(value.to_string()),
            "dims" => {
                let parsed = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|d| d.parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| {
                            DataError::HeaderMismatch(format!("bad dims {:?}", value))
                        })?
                };
                dims = Some(parsed);
            }
            "dtype" => {
                dtype = Some(Dtype::from_tag(value).ok_or_else(|| {
                    DataError::HeaderMismatch(format!("unknown dtype {:?}", value))
                })?)
            }
            "seed" => {
                seed = Some(value.parse::<u64>().map_err(|_| {
                    DataError::HeaderMismatch(format!("bad seed {:?}", value))
                })?)
            }
            "crc32" => {
                crc = Some(u32::from_str_radix(value, 16).map_err(|_| {
                    DataError::HeaderMismatch(format!("bad crc32 {:?}", value))
                })?)
            }
            _ => {
                extra.insert(key.to_string(), value.to_string());
            }
        }
    }

    let meta = ContainerMeta {
        name: name.ok_or_else(|| DataError::HeaderMismatch("missing name".into()))?,
        dims: dims.ok_or_else(|| DataError::HeaderMismatch("missing dims".into()))?,
        dtype: dtype.ok_or_else(|| DataError::HeaderMismatch("missing dtype".into()))?,
        seed: seed.ok_or_else(|| DataError::HeaderMismatch("missing seed".into()))?,
        extra,
    };
    let expected_crc = crc.ok_or_else(|| DataError::HeaderMismatch("missing crc32".into()))?;

    if payload.len() != meta.payload_len() {
        return Err(DataError::TruncatedPayload {
            expected: meta.payload_len(),
            found: payload.len(),
        });
    }
    let actual_crc = crc32fast::hash(payload);
    if actual_crc != expected_crc {
        return Err(DataError::ChecksumMismatch { header: expected_crc, payload: actual_crc });
    }
    Ok((meta, payload.to_vec()))
}
