//! Pixel-index token sequences.
//!
//! Vocabulary over an N-pixel image: PAD = 0, pixel ids 1..=N numbered
//! raster-wise from the upper-left corner, BOS = N+1, EOS = N+2.

use super::TranslatorError;
use crate::data::Image;
use crate::scalar::Scalar;

pub const PAD: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    tokens: Vec<usize>,
    n_pixels: usize,
}

impl TokenSeq {
    pub fn bos(n_pixels: usize) -> usize {
        n_pixels + 1
    }

    pub fn eos(n_pixels: usize) -> usize {
        n_pixels + 2
    }

    pub fn vocab(n_pixels: usize) -> usize {
        n_pixels + 3
    }

    /// Validates the canonical layout: BOS, strictly increasing pixel ids,
    /// EOS, then only PAD.
    pub fn from_tokens(tokens: Vec<usize>, n_pixels: usize) -> Result<Self, TranslatorError> {
        let bos = Self::bos(n_pixels);
        let eos = Self::eos(n_pixels);
        let vocab = Self::vocab(n_pixels);
        for &t in &tokens {
            if t >= vocab {
                return Err(TranslatorError::TokenOutOfRange { token: t, vocab });
            }
        }
        if tokens.first() != Some(&bos) {
            return Err(TranslatorError::InvalidTokenSequence(
                "sequence must begin with BOS".into(),
            ));
        }
        let eos_pos = tokens
            .iter()
            .position(|&t| t == eos)
            .ok_or_else(|| TranslatorError::InvalidTokenSequence("missing EOS".into()))?;
        let mut prev = 0usize;
        for &t in &tokens[1..eos_pos] {
            if t == PAD || t == bos {
                return Err(TranslatorError::InvalidTokenSequence(format!(
                    "unexpected token {} before EOS",
                    t
                )));
            }
            if t <= prev {
                return Err(TranslatorError::InvalidTokenSequence(format!(
                    "pixel ids must be strictly increasing, got {} after {}",
                    t, prev
                )));
            }
            prev = t;
        }
        if tokens[eos_pos + 1..].iter().any(|&t| t != PAD) {
            return Err(TranslatorError::InvalidTokenSequence(
                "only PAD may follow EOS".into(),
            ));
        }
        Ok(Self { tokens, n_pixels })
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Appends PAD tokens up to `len`.
    pub fn padded_to(&self, len: usize) -> Vec<usize> {
        let mut out = self.tokens.clone();
        out.resize(len.max(out.len()), PAD);
        out
    }
}

/// Emits BOS, the raster-order ids (row * width + col + 1) of lit pixels,
/// and EOS.
pub fn tokenize_image<S: Scalar>(image: &Image<S>) -> Result<TokenSeq, TranslatorError> {
    if !image.is_binary() {
        return Err(TranslatorError::NonBinaryImage);
    }
    let n = image.n_pixels();
    let mut tokens = Vec::with_capacity(image.lit_pixels().len() + 2);
    tokens.push(TokenSeq::bos(n));
    tokens.extend(image.lit_pixels().iter().map(|&i| i + 1));
    tokens.push(TokenSeq::eos(n));
    Ok(TokenSeq { tokens, n_pixels: n })
}

/// Sets pixel `id - 1` for every pixel id in the stream; duplicates and
/// out-of-order ids are tolerated (set semantics) and structural tokens are
/// skipped. Ids beyond the vocabulary are rejected.
pub fn detokenize<S: Scalar>(
    tokens: &[usize],
    width: usize,
    height: usize,
) -> Result<Image<S>, TranslatorError> {
    let n = width * height;
    let vocab = TokenSeq::vocab(n);
    let mut pixels = vec![S::zero(); n];
    for &t in tokens {
        if t >= vocab {
            return Err(TranslatorError::TokenOutOfRange { token: t, vocab });
        }
        if (1..=n).contains(&t) {
            pixels[t - 1] = S::one();
        }
    }
    Ok(Image::new(width, height, pixels).expect("binary pixels are in range"))
}

/// Targets padded to the batch maximum, with a mask marking real positions.
#[derive(Debug, Clone)]
pub struct PaddedBatch {
    pub tokens: Vec<Vec<usize>>,
    pub mask: Vec<Vec<bool>>,
    pub max_len: usize,
}

pub fn batch_pad(seqs: &[TokenSeq]) -> Result<PaddedBatch, TranslatorError> {
    if seqs.is_empty() {
        return Err(TranslatorError::EmptyDataset);
    }
    let max_len = seqs.iter().map(|s| s.len()).max().unwrap();
    let tokens: Vec<Vec<usize>> = seqs.iter().map(|s| s.padded_to(max_len)).collect();
    let mask = seqs
        .iter()
        .map(|s| {
            let mut m = vec![true; s.len()];
            m.resize(max_len, false);
            m
        })
        .collect();
    Ok(PaddedBatch { tokens, mask, max_len })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_image_is_bos_eos() {
        let img: Image<f64> = Image::zeros(4, 4);
        let seq = tokenize_image(&img).unwrap();
        assert_eq!(seq.tokens(), &[17, 18]); // BOS=17, EOS=18 for N=16
    }

    #[test]
    fn upper_left_pixel_is_token_one() {
        let mut pixels = vec![0.0f64; 16];
        pixels[0] = 1.0;
        let img = Image::new(4, 4, pixels).unwrap();
        let seq = tokenize_image(&img).unwrap();
        assert_eq!(seq.tokens(), &[17, 1, 18]);
    }

    #[test]
    fn round_trip_identity_on_random_binary() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let pixels: Vec<f64> =
                (0..36).map(|_| if rng.gen::<f64>() < 0.3 { 1.0 } else { 0.0 }).collect();
            let img = Image::new(6, 6, pixels).unwrap();
            let seq = tokenize_image(&img).unwrap();
            let back: Image<f64> = detokenize(seq.tokens(), 6, 6).unwrap();
            assert_eq!(back, img);
        }
    }

    #[test]
    fn non_binary_image_is_rejected() {
        let img = Image::new(2, 2, vec![0.0, 0.5, 1.0, 0.0]).unwrap();
        assert!(matches!(
            tokenize_image(&img),
            Err(TranslatorError::NonBinaryImage)
        ));
    }

    #[test]
    fn detokenize_tolerates_duplicates_and_disorder() {
        let img: Image<f64> = detokenize(&[17, 3, 1, 3, 18], 4, 4).unwrap();
        let mut expected = vec![0.0; 16];
        expected[0] = 1.0;
        expected[2] = 1.0;
        assert_eq!(img.pixels(), expected.as_slice());
        // also idempotent on duplicated pixel ids mid-decode
        let twice: Image<f64> = detokenize(&[17, 3, 3, 3, 18], 4, 4).unwrap();
        assert_eq!(twice.pixels()[2], 1.0);
    }

    #[test]
    fn detokenize_rejects_out_of_vocab() {
        assert!(matches!(
            detokenize::<f64>(&[17, 19, 18], 4, 4),
            Err(TranslatorError::TokenOutOfRange { token: 19, vocab: 19 })
        ));
    }

    #[test]
    fn token_seq_invariants_are_enforced() {
        let n = 16;
        assert!(TokenSeq::from_tokens(vec![17, 1, 5, 18], n).is_ok());
        assert!(TokenSeq::from_tokens(vec![17, 1, 5, 18, 0, 0], n).is_ok());
        // must start with BOS
        assert!(TokenSeq::from_tokens(vec![1, 5, 18], n).is_err());
        // strictly increasing
        assert!(TokenSeq::from_tokens(vec![17, 5, 1, 18], n).is_err());
        // no repeats
        assert!(TokenSeq::from_tokens(vec![17, 5, 5, 18], n).is_err());
        // nothing but PAD after EOS
        assert!(TokenSeq::from_tokens(vec![17, 5, 18, 1], n).is_err());
        // missing EOS
        assert!(TokenSeq::from_tokens(vec![17, 5], n).is_err());
    }

    #[test]
    fn batch_pad_pads_to_max_and_masks() {
        let a = TokenSeq::from_tokens(vec![17, 1, 2, 18], 16).unwrap();
        let b = TokenSeq::from_tokens(vec![17, 18], 16).unwrap();
        let batch = batch_pad(&[a, b]).unwrap();
        assert_eq!(batch.max_len, 4);
        assert_eq!(batch.tokens[1], vec![17, 18, 0, 0]);
        assert_eq!(batch.mask[1], vec![true, true, false, false]);
        assert_eq!(batch.tokens[0], vec![17, 1, 2, 18]);
        assert_eq!(batch.mask[0], vec![true; 4]);
    }

    #[test]
    fn equal_length_batch_is_unchanged() {
        let a = TokenSeq::from_tokens(vec![17, 1, 18], 16).unwrap();
        let b = TokenSeq::from_tokens(vec![17, 2, 18], 16).unwrap();
        let batch = batch_pad(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(batch.tokens[0], a.tokens());
        assert_eq!(batch.tokens[1], b.tokens());
        assert!(batch.mask.iter().flatten().all(|&m| m));
    }
}
