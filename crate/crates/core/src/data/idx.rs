//! Reader for the big-endian IDX image/label files used by the classic
//! handwritten-digit distribution.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};

use super::image::{Image, ImageSet, Split};
use super::DataError;
use crate::scalar::Scalar;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Loads an IDX image file, optionally paired with an IDX label file.
/// Pixel bytes are scaled to `[0,1]` as `byte / 255`.
pub fn load_idx<S: Scalar>(
    images_path: &Path,
    labels_path: Option<&Path>,
    split: Split,
) -> Result<ImageSet<S>, DataError> {
    let mut set = load_idx_images(images_path, split)?;
    if let Some(lp) = labels_path {
        let labels = load_idx_labels(lp)?;
        if labels.len() != set.len() {
            return Err(DataError::DimensionMismatch(format!(
                "{} labels for {} images",
                labels.len(),
                set.len()
            )));
        }
        set.labels = Some(labels);
    }
    Ok(set)
}

pub fn load_idx_images<S: Scalar>(path: &Path, split: Split) -> Result<ImageSet<S>, DataError> {
    let mut reader = BufReader::new(File::open(path)?);
    parse_idx_images(&mut reader, split)
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>, DataError> {
    let mut reader = BufReader::new(File::open(path)?);
    parse_idx_labels(&mut reader)
}

fn parse_idx_images<S: Scalar, R: Read>(
    reader: &mut R,
    split: Split,
) -> Result<ImageSet<S>, DataError> {
    let magic = reader.read_u32::<BigEndian>()?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(DataError::BadMagic(magic));
    }
    let count = reader.read_u32::<BigEndian>()? as usize;
    let rows = reader.read_u32::<BigEndian>()? as usize;
    let cols = reader.read_u32::<BigEndian>()? as usize;

    let expected = count * rows * cols;
    let mut payload = Vec::with_capacity(expected);
    reader.read_to_end(&mut payload)?;
    if payload.len() < expected {
        return Err(DataError::TruncatedPayload { expected, found: payload.len() });
    }

    let scale = S::from_f64c(1.0 / 255.0);
    let images = payload[..expected]
        .chunks_exact(rows * cols)
        .map(|chunk| {
            let pixels = chunk.iter().map(|&b| S::from_f64c(b as f64) * scale).collect();
            Image::new(cols, rows, pixels)
        })
        .collect::<Result<Vec<_>, _>>()?;
    ImageSet::new(images, None, split)
}

fn parse_idx_labels<R: Read>(reader: &mut R) -> Result<Vec<u8>, DataError> {
    let magic = reader.read_u32::<BigEndian>()?;
    if magic != IDX_LABELS_MAGIC {
        return Err(DataError::BadMagic(magic));
    }
    let count = reader.read_u32::<BigEndian>()? as usize;
    let mut labels = Vec::with_capacity(count);
    reader.read_to_end(&mut labels)?;
    if labels.len() < count {
        return Err(DataError::TruncatedPayload { expected: count, found: labels.len() });
    }
    labels.truncate(count);
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_image_bytes(count: u32, rows: u32, cols: u32, payload: &[u8]) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&count.to_be_bytes());
        bytes.extend_from_slice(&rows.to_be_bytes());
        bytes.extend_from_slice(&cols.to_be_bytes());
        bytes.extend_from_slice(payload);
        bytes
    }

    #[test]
    fn parses_single_zero_image() {
        let bytes = idx_image_bytes(1, 28, 28, &[0u8; 784]);
        let set: ImageSet<f64> =
            parse_idx_images(&mut bytes.as_slice(), Split::Train).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.images[0].width(), 28);
        assert_eq!(set.images[0].height(), 28);
        assert!(set.images[0].pixels().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn rejects_wrong_magic() {
        let mut bytes = idx_image_bytes(1, 1, 1, &[0]);
        bytes[3] = 0x02;
        let err = parse_idx_images::<f64, _>(&mut bytes.as_slice(), Split::Train).unwrap_err();
        assert!(matches!(err, DataError::BadMagic(0x0000_0802)));
    }

    #[test]
    fn rejects_truncated_payload() {
        let bytes = idx_image_bytes(2, 2, 2, &[0u8; 7]);
        let err = parse_idx_images::<f64, _>(&mut bytes.as_slice(), Split::Train).unwrap_err();
        assert!(matches!(err, DataError::TruncatedPayload { expected: 8, found: 7 }));
    }

    #[test]
    fn pixel_values_are_byte_over_255() {
        let bytes = idx_image_bytes(1, 1, 4, &[0, 51, 128, 255]);
        let set: ImageSet<f64> =
            parse_idx_images(&mut bytes.as_slice(), Split::Test).unwrap();
        let px = set.images[0].pixels();
        for (i, &b) in [0u8, 51, 128, 255].iter().enumerate() {
            assert_eq!(px[i], b as f64 / 255.0);
        }
    }

    #[test]
    fn header_matches_published_training_file_layout() {
        // Header fields of the canonical 60000-image training file, as seen
        // in a hex dump: 00000803 0000ea60 0000001c 0000001c.
        let header: [u8; 16] = [
            0x00, 0x00, 0x08, 0x03, 0x00, 0x00, 0xea, 0x60, 0x00, 0x00, 0x00, 0x1c, 0x00, 0x00,
            0x00, 0x1c,
        ];
        let mut bytes = header.to_vec();
        bytes.extend_from_slice(&vec![0u8; 60000 * 28 * 28]);
        let set: ImageSet<f32> =
            parse_idx_images(&mut bytes.as_slice(), Split::Train).unwrap();
        assert_eq!(set.len(), 60000);
        assert_eq!(set.images[0].width(), 28);
        assert_eq!(set.images[0].height(), 28);
    }

    #[test]
    fn label_count_must_match_images() {
        let mut label_bytes = Vec::new();
        label_bytes.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        label_bytes.extend_from_slice(&2u32.to_be_bytes());
        label_bytes.extend_from_slice(&[7, 3]);
        let labels = parse_idx_labels(&mut label_bytes.as_slice()).unwrap();
        assert_eq!(labels, vec![7, 3]);

        // one image, two labels -> mismatch via load_idx
        let dir = std::env::temp_dir().join("ghostimg_idx_test");
        std::fs::create_dir_all(&dir).unwrap();
        let ip = dir.join("im.idx");
        let lp = dir.join("lb.idx");
        std::fs::write(&ip, idx_image_bytes(1, 2, 2, &[0u8; 4])).unwrap();
        std::fs::write(&lp, &label_bytes).unwrap();
        let err = load_idx::<f64>(&ip, Some(&lp), Split::Train).unwrap_err();
        assert!(matches!(err, DataError::DimensionMismatch(_)));
        std::fs::remove_dir_all(&dir).ok();
    }
}
