use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::image::Image;
use super::DataError;
use crate::scalar::Scalar;

/// Writes a binary PGM (P5, maxval 255); pixel byte = round(value * 255).
pub fn write_pgm<S: Scalar>(path: &Path, image: &Image<S>) -> Result<(), DataError> {
    let mut file = File::create(path)?;
    write!(file, "P5\n{} {}\n255\n", image.width(), image.height())?;
    let bytes: Vec<u8> = image
        .pixels()
        .iter()
        .map(|&p| (p.to_f64().unwrap_or(0.0) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    file.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_p5_header_and_payload() {
        let dir = std::env::temp_dir().join("ghostimg_pgm_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("img.pgm");
        let img = Image::new(2, 1, vec![0.0f64, 1.0]).unwrap();
        write_pgm(&path, &img).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes, b"P5\n2 1\n255\n\x00\xff");
        std::fs::remove_dir_all(&dir).ok();
    }
}
