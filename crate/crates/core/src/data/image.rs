use super::DataError;
use crate::scalar::Scalar;

/// A rectangular grid of intensities in `[0, 1]`, stored row-major.
///
/// Objects and reconstructions are both carried as `Image`; "binary" images
/// additionally have every pixel exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<S: Scalar> {
    width: usize,
    height: usize,
    pixels: Vec<S>,
}

impl<S: Scalar> Image<S> {
    pub fn new(width: usize, height: usize, pixels: Vec<S>) -> Result<Self, DataError> {
        if pixels.len() != width * height {
            return Err(DataError::DimensionMismatch(format!(
                "expected {}x{}={} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        for (i, &p) in pixels.iter().enumerate() {
            if !(p >= S::zero() && p <= S::one()) {
                return Err(DataError::PixelOutOfRange {
                    index: i,
                    value: p.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self { width, height, pixels })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec![S::zero(); width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_pixels(&self) -> usize {
        self.pixels.len()
    }

    pub fn pixels(&self) -> &[S] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> S {
        self.pixels[y * self.width + x]
    }

    /// True when every pixel is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.pixels.iter().all(|&p| p == S::zero() || p == S::one())
    }

    /// Raster-order indices of pixels that are exactly 1.
    pub fn lit_pixels(&self) -> Vec<usize> {
        self.pixels
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == S::one())
            .map(|(i, _)| i)
            .collect()
    }

    /// Min-max rescaling of an arbitrary real field into a displayable image.
    /// A constant field maps to all zeros.
    pub fn from_raw_field(width: usize, height: usize, raw: &[S]) -> Result<Self, DataError> {
        if raw.len() != width * height {
            return Err(DataError::DimensionMismatch(format!(
                "raw field has {} values for {}x{} image",
                raw.len(),
                width,
                height
            )));
        }
        let mut lo = S::infinity();
        let mut hi = S::neg_infinity();
        for &v in raw {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        let span = hi - lo;
        let pixels = if span > S::zero() {
            raw.iter().map(|&v| (v - lo) / span).collect()
        } else {
            vec![S::zero(); raw.len()]
        };
        Ok(Self { width, height, pixels })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// An ordered list of same-sized images with optional 1:1 labels.
#[derive(Debug, Clone)]
pub struct ImageSet<S: Scalar> {
    pub images: Vec<Image<S>>,
    pub labels: Option<Vec<u8>>,
    pub split: Split,
}

impl<S: Scalar> ImageSet<S> {
    pub fn new(
        images: Vec<Image<S>>,
        labels: Option<Vec<u8>>,
        split: Split,
    ) -> Result<Self, DataError> {
        if let Some((first, rest)) = images.split_first() {
            for img in rest {
                if img.width() != first.width() || img.height() != first.height() {
                    return Err(DataError::DimensionMismatch(
                        "images in a set must share dimensions".into(),
                    ));
                }
            }
        }
        if let Some(ref l) = labels {
            if l.len() != images.len() {
                return Err(DataError::DimensionMismatch(format!(
                    "{} labels for {} images",
                    l.len(),
                    images.len()
                )));
            }
        }
        Ok(Self { images, labels, split })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Keeps only the first `n` images (and labels).
    pub fn truncate(&mut self, n: usize) {
        self.images.truncate(n);
        if let Some(ref mut l) = self.labels {
            l.truncate(n);
        }
    }
}

/// Sub-Nyquist sampling geometry: `n_patterns = ceil(sampling_ratio * n_pixels)`.
///
/// The ceiling convention reproduces the usual pattern counts quoted for
/// percentage sampling ratios (e.g. 5% of 1024 pixels -> 52 patterns,
/// 2% -> 21).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    n_pixels: usize,
    sampling_ratio: f64,
    n_patterns: usize,
}

impl SamplingConfig {
    pub fn new(n_pixels: usize, sampling_ratio: f64) -> Result<Self, DataError> {
        if n_pixels == 0 {
            return Err(DataError::InvalidParameter("n_pixels must be positive".into()));
        }
        if !(sampling_ratio > 0.0 && sampling_ratio <= 1.0) {
            return Err(DataError::InvalidParameter(format!(
                "sampling ratio {} outside (0, 1]",
                sampling_ratio
            )));
        }
        let n_patterns = (sampling_ratio * n_pixels as f64).ceil() as usize;
        Ok(Self { n_pixels, sampling_ratio, n_patterns })
    }

    /// Pins the pattern count directly; the ratio becomes `k / n`.
    pub fn with_patterns(n_pixels: usize, n_patterns: usize) -> Result<Self, DataError> {
        if n_pixels == 0 || n_patterns == 0 {
            return Err(DataError::InvalidParameter(
                "n_pixels and n_patterns must be positive".into(),
            ));
        }
        if n_patterns > n_pixels {
            return Err(DataError::InvalidParameter(format!(
                "{} patterns exceed {} pixels",
                n_patterns, n_pixels
            )));
        }
        let sampling_ratio = n_patterns as f64 / n_pixels as f64;
        Ok(Self { n_pixels, sampling_ratio, n_patterns })
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn sampling_ratio(&self) -> f64 {
        self.sampling_ratio
    }

    pub fn n_patterns(&self) -> usize {
        self.n_patterns
    }
}

/// Resizes every image to `target x target` (bilinear) and binarizes at
/// `threshold` (pixel >= threshold -> 1).
pub fn preprocess<S: Scalar>(
    set: &ImageSet<S>,
    target: usize,
    threshold: f64,
) -> Result<ImageSet<S>, DataError> {
    if set.is_empty() {
        return Err(DataError::EmptySet);
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(DataError::InvalidParameter(format!(
            "binarization threshold {} outside (0, 1)",
            threshold
        )));
    }
    if target == 0 {
        return Err(DataError::InvalidParameter("target size must be positive".into()));
    }
    let th = S::from_f64c(threshold);
    let images = set
        .images
        .iter()
        .map(|img| {
            let resized = resize_bilinear(img, target, target);
            let pixels = resized
                .pixels()
                .iter()
                .map(|&p| if p >= th { S::one() } else { S::zero() })
                .collect();
            Image::new(target, target, pixels)
        })
        .collect::<Result<Vec<_>, _>>()?;
    ImageSet::new(images, set.labels.clone(), set.split)
}

/// Pixel-center-aligned bilinear resampling. A same-size resize is the
/// identity map.
fn resize_bilinear<S: Scalar>(src: &Image<S>, out_w: usize, out_h: usize) -> Image<S> {
    let sw = src.width();
    let sh = src.height();
    let sx_scale = sw as f64 / out_w as f64;
    let sy_scale = sh as f64 / out_h as f64;
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * sy_scale - 0.5).clamp(0.0, (sh - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let fy = S::from_f64c(sy - y0 as f64);
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * sx_scale - 0.5).clamp(0.0, (sw - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let fx = S::from_f64c(sx - x0 as f64);
            let one = S::one();
            let v = src.get(x0, y0) * (one - fx) * (one - fy)
                + src.get(x1, y0) * fx * (one - fy)
                + src.get(x0, y1) * (one - fx) * fy
                + src.get(x1, y1) * fx * fy;
            // Interpolation of in-range values stays in range; clamp guards
            // rounding at the boundaries.
            pixels.push(v.max(S::zero()).min(S::one()));
        }
    }
    Image { width: out_w, height: out_h, pixels }
}
