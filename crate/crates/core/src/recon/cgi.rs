use super::ReconError;
use crate::data::Image;
use crate::optics::{BucketSequence, PatternStack};
use crate::scalar::Scalar;

/// Correlation reconstruction output: the raw covariance field plus its
/// min-max display normalization.
#[derive(Debug, Clone)]
pub struct CgiResult<S: Scalar> {
    pub raw: Vec<S>,
    pub display: Image<S>,
}

/// Correlation ghost imaging: per-pixel covariance between the bucket
/// readings and the pattern intensities,
/// `O'(x,y) = (1/K) sum_i (I_i - mean(I)) (P_i(x,y) - mean(P)(x,y))`.
pub fn cgi_reconstruct<S: Scalar>(
    patterns: &PatternStack<S>,
    buckets: &BucketSequence<S>,
) -> Result<CgiResult<S>, ReconError> {
    let k = patterns.len();
    if k != buckets.len() {
        return Err(ReconError::DimensionMismatch(format!(
            "{} patterns vs {} bucket readings",
            k,
            buckets.len()
        )));
    }
    if k == 0 {
        return Err(ReconError::InvalidParameter("empty pattern stack".into()));
    }
    let n = patterns.n_pixels();
    let kf = S::from_f64c(k as f64);

    let bucket_mean = buckets.values.iter().copied().sum::<S>() / kf;

    let mut pattern_mean = vec![S::zero(); n];
    for p in patterns.patterns() {
        for (m, &v) in pattern_mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut pattern_mean {
        *m = *m / kf;
    }

    let mut raw = vec![S::zero(); n];
    for (i, p) in patterns.patterns().enumerate() {
        let di = buckets.values[i] - bucket_mean;
        for ((r, &v), &m) in raw.iter_mut().zip(p).zip(&pattern_mean) {
            *r += di * (v - m);
        }
    }
    for r in &mut raw {
        *r = *r / kf;
    }

    let display = Image::from_raw_field(patterns.width(), patterns.height(), &raw)
        .expect("raw field has pattern dimensions");
    Ok(CgiResult { raw, display })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::SpeckleKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stack(k: usize, w: usize, seed: u64) -> PatternStack<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..k * w * w).map(|_| rng.gen()).collect();
        PatternStack::from_data(w, w, data, SpeckleKind::Imported, seed).unwrap()
    }

    #[test]
    fn single_pattern_gives_zero_field() {
        let stack = random_stack(1, 4, 1);
        let buckets = BucketSequence::new(vec![2.5]);
        let out = cgi_reconstruct(&stack, &buckets).unwrap();
        assert!(out.raw.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_buckets_give_zero_field() {
        let stack = random_stack(6, 4, 2);
        let buckets = BucketSequence::new(vec![1.0; 6]);
        let out = cgi_reconstruct(&stack, &buckets).unwrap();
        assert!(out.raw.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn matches_brute_force_covariance() {
        // oracle: cov(I, P_xy) = E[I P] - E[I] E[P], accumulated pixel by pixel
        let stack = random_stack(3, 2, 3);
        let buckets = BucketSequence::new(vec![0.3, 1.4, 0.8]);
        let out = cgi_reconstruct(&stack, &buckets).unwrap();
        let k = 3;
        for px in 0..4 {
            let mut e_ip = 0.0;
            let mut e_i = 0.0;
            let mut e_p = 0.0;
            for i in 0..k {
                e_ip += buckets.values[i] * stack.pattern(i)[px];
                e_i += buckets.values[i];
                e_p += stack.pattern(i)[px];
            }
            let kf = k as f64;
            let cov = e_ip / kf - (e_i / kf) * (e_p / kf);
            assert!((out.raw[px] - cov).abs() < 1e-12, "pixel {}", px);
        }
    }

    #[test]
    fn raw_field_scales_linearly_under_affine_buckets() {
        let stack = random_stack(8, 3, 4);
        let values: Vec<f64> = (0..8).map(|i| (i as f64).sin() + 1.5).collect();
        let base = cgi_reconstruct(&stack, &BucketSequence::new(values.clone())).unwrap();
        let (a, b) = (2.5, -0.7);
        let transformed: Vec<f64> = values.iter().map(|&v| a * v + b).collect();
        let scaled = cgi_reconstruct(&stack, &BucketSequence::new(transformed)).unwrap();
        for (s, r) in scaled.raw.iter().zip(&base.raw) {
            assert!((s - a * r).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let stack = random_stack(3, 2, 5);
        let buckets = BucketSequence::new(vec![1.0, 2.0]);
        assert!(matches!(
            cgi_reconstruct(&stack, &buckets),
            Err(ReconError::DimensionMismatch(_))
        ));
    }
}
