//! Checkpoint container: a text manifest (version, architecture, optimizer
//! configuration, tensor index with checksums) followed by raw little-endian
//! tensor payloads. Round trips are bit-exact, including optimizer moments.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::model::{visit_params, visit_params_mut, Model, ModelConfig};
use super::TranslatorError;
use crate::autograd::{AdamConfig, AdamState};
use crate::scalar::Scalar;

const MAGIC: &str = "GTC1";
const DATA_MARKER: &[u8] = b"\nDATA\n";

pub fn save_checkpoint<S: Scalar>(model: &Model<S>, path: &Path) -> Result<(), TranslatorError> {
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    let c = &model.config;
    header.push_str(&format!(
        "dtype={} n_enc_layers={} n_dec_layers={} d_model={} n_heads={} d_ff={} \
         width={} height={} max_src_len={}\n",
        S::DTYPE.tag(),
        c.n_enc_layers,
        c.n_dec_layers,
        c.d_model,
        c.n_heads,
        c.d_ff,
        c.width,
        c.height,
        c.max_src_len
    ));
    header.push_str(&format!(
        "seed={} epoch={} adam_step={}\n",
        model.seed, model.epoch, model.adam.step
    ));
    let a = &model.adam.cfg;
    header.push_str(&format!(
        "lr_max={:?} beta1={:?} beta2={:?} eps={:?} warmup_steps={}\n",
        a.lr_max.to_f64().unwrap(),
        a.beta1.to_f64().unwrap(),
        a.beta2.to_f64().unwrap(),
        a.eps.to_f64().unwrap(),
        a.warmup_steps
    ));

    let mut entries: Vec<(String, Vec<usize>, &[S])> =
        visit_params(&model.config, &model.params, |name, shape, data| {
            (name, shape, data)
        });
    let names: Vec<String> = entries.iter().map(|(n, _, _)| n.clone()).collect();
    for (name, m) in names.iter().zip(&model.adam.m) {
        entries.push((format!("adam_m:{}", name), vec![m.len()], m.as_slice()));
    }
    for (name, v) in names.iter().zip(&model.adam.v) {
        entries.push((format!("adam_v:{}", name), vec![v.len()], v.as_slice()));
    }

    header.push_str(&format!("tensors={}\n", entries.len()));
    let mut payload = Vec::new();
    for (name, shape, data) in &entries {
        let start = payload.len();
        for &value in *data {
            value.append_le_bytes(&mut payload);
        }
        let bytes = &payload[start..];
        let dims = shape
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(",");
        header.push_str(&format!(
            "{} {} {:08x} {}\n",
            name,
            dims,
            crc32fast::hash(bytes),
            bytes.len()
        ));
    }

    let mut file = File::create(path)?;
    file.write_all(header.as_bytes())?;
    file.write_all(b"DATA\n")?;
    file.write_all(&payload)?;
    Ok(())
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<Model<S>, TranslatorError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;

    let marker = find_marker(&bytes).ok_or_else(|| {
        TranslatorError::CorruptCheckpoint("missing DATA marker".into())
    })?;
    let header = std::str::from_utf8(&bytes[..marker])
        .map_err(|_| TranslatorError::CorruptCheckpoint("header is not UTF-8".into()))?;
    let payload = &bytes[marker + DATA_MARKER.len()..];

    let mut lines = header.lines();
    let magic = lines.next().unwrap_or("");
    if magic != MAGIC {
        return Err(TranslatorError::VersionMismatch { found: magic.to_string() });
    }

    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    let mut index_lines = Vec::new();
    let mut tensor_count: Option<usize> = None;
    for line in lines {
        if let Some(rest) = line.strip_prefix("tensors=") {
            tensor_count = Some(rest.parse().map_err(|_| {
                TranslatorError::CorruptCheckpoint(format!("bad tensor count {:?}", rest))
            })?);
            continue;
        }
        if tensor_count.is_none() {
            for pair in line.split(' ') {
                if let Some((k, v)) = pair.split_once('=') {
                    fields.insert(k.to_string(), v.to_string());
                }
            }
        } else {
            index_lines.push(line);
        }
    }
    let tensor_count = tensor_count
        .ok_or_else(|| TranslatorError::CorruptCheckpoint("missing tensor index".into()))?;
    if index_lines.len() != tensor_count {
        return Err(TranslatorError::CorruptCheckpoint(format!(
            "index lists {} tensors, header promised {}",
            index_lines.len(),
            tensor_count
        )));
    }

    let get = |key: &str| -> Result<&String, TranslatorError> {
        fields
            .get(key)
            .ok_or_else(|| TranslatorError::CorruptCheckpoint(format!("missing field {}", key)))
    };
    let parse_usize = |key: &str| -> Result<usize, TranslatorError> {
        get(key)?.parse::<usize>().map_err(|_| {
            TranslatorError::CorruptCheckpoint(format!("bad integer field {}", key))
        })
    };
    let parse_f64 = |key: &str| -> Result<f64, TranslatorError> {
        get(key)?.parse::<f64>().map_err(|_| {
            TranslatorError::CorruptCheckpoint(format!("bad float field {}", key))
        })
    };

    if get("dtype")? != S::DTYPE.tag() {
        return Err(TranslatorError::CorruptCheckpoint(format!(
            "checkpoint dtype {} does not match requested {}",
            get("dtype")?,
            S::DTYPE.tag()
        )));
    }

    let config = ModelConfig {
        n_enc_layers: parse_usize("n_enc_layers")?,
        n_dec_layers: parse_usize("n_dec_layers")?,
        d_model: parse_usize("d_model")?,
        n_heads: parse_usize("n_heads")?,
        d_ff: parse_usize("d_ff")?,
        width: parse_usize("width")?,
        height: parse_usize("height")?,
        max_src_len: parse_usize("max_src_len")?,
    };
    let adam_cfg = AdamConfig {
        lr_max: S::from_f64c(parse_f64("lr_max")?),
        beta1: S::from_f64c(parse_f64("beta1")?),
        beta2: S::from_f64c(parse_f64("beta2")?),
        eps: S::from_f64c(parse_f64("eps")?),
        warmup_steps: parse_usize("warmup_steps")?,
    };
    let seed = get("seed")?.parse::<u64>().map_err(|_| {
        TranslatorError::CorruptCheckpoint("bad seed".into())
    })?;
    let epoch = parse_usize("epoch")?;
    let adam_step = get("adam_step")?.parse::<u64>().map_err(|_| {
        TranslatorError::CorruptCheckpoint("bad adam_step".into())
    })?;

    // decode tensors strictly in index order
    let mut offset = 0usize;
    let elem = S::DTYPE.size_bytes();
    let mut decoded: Vec<(String, Vec<S>)> = Vec::with_capacity(tensor_count);
    for line in index_lines {
        let parts: Vec<&str> = line.split(' ').collect();
        if parts.len() != 4 {
            return Err(TranslatorError::CorruptCheckpoint(format!(
                "malformed index line {:?}",
                line
            )));
        }
        let name = parts[0].to_string();
        let crc = u32::from_str_radix(parts[2], 16).map_err(|_| {
            TranslatorError::CorruptCheckpoint(format!("bad crc on {:?}", name))
        })?;
        let len: usize = parts[3].parse().map_err(|_| {
            TranslatorError::CorruptCheckpoint(format!("bad length on {:?}", name))
        })?;
        if offset + len > payload.len() {
            return Err(TranslatorError::CorruptCheckpoint("payload too short".into()));
        }
        let chunk = &payload[offset..offset + len];
        offset += len;
        if crc32fast::hash(chunk) != crc {
            return Err(TranslatorError::CorruptCheckpoint(format!(
                "checksum mismatch on {:?}",
                name
            )));
        }
        let values = chunk.chunks_exact(elem).map(S::from_le_bytes_slice).collect();
        decoded.push((name, values));
    }

    // materialize a model and overwrite every tensor in visit order
    let mut model = Model::new(config.clone(), adam_cfg, seed)?;
    let expected_names =
        visit_params(&config, &model.params, |name, _, _| name);
    let n_params = expected_names.len();
    if decoded.len() != 3 * n_params {
        return Err(TranslatorError::CorruptCheckpoint(format!(
            "expected {} tensors, found {}",
            3 * n_params,
            decoded.len()
        )));
    }
    for ((slot, expected), (name, values)) in visit_params_mut(&mut model.params)
        .into_iter()
        .zip(&expected_names)
        .zip(&decoded[..n_params])
    {
        if name != expected || slot.len() != values.len() {
            return Err(TranslatorError::CorruptCheckpoint(format!(
                "unexpected tensor {:?}, wanted {:?}",
                name, expected
            )));
        }
        slot.copy_from_slice(values);
    }
    let mut adam = AdamState::new(
        &decoded[..n_params].iter().map(|(_, v)| v.len()).collect::<Vec<_>>(),
        model.adam.cfg.clone(),
    );
    for ((slot, expected), (name, values)) in adam
        .m
        .iter_mut()
        .zip(&expected_names)
        .zip(&decoded[n_params..2 * n_params])
    {
        if *name != format!("adam_m:{}", expected) || slot.len() != values.len() {
            return Err(TranslatorError::CorruptCheckpoint(format!(
                "unexpected tensor {:?}",
                name
            )));
        }
        slot.copy_from_slice(values);
    }
    for ((slot, expected), (name, values)) in adam
        .v
        .iter_mut()
        .zip(&expected_names)
        .zip(&decoded[2 * n_params..])
    {
        if *name != format!("adam_v:{}", expected) || slot.len() != values.len() {
            return Err(TranslatorError::CorruptCheckpoint(format!(
                "unexpected tensor {:?}",
                name
            )));
        }
        slot.copy_from_slice(values);
    }
    adam.step = adam_step;
    model.adam = adam;
    model.epoch = epoch;
    Ok(model)
}

fn find_marker(bytes: &[u8]) -> Option<usize> {
    bytes
        .windows(DATA_MARKER.len())
        .position(|w| w == DATA_MARKER)
}
