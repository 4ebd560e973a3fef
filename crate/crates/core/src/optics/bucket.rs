use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::speckle::PatternStack;
use super::OpticsError;
use crate::data::Image;
use crate::scalar::Scalar;

/// One scalar detector reading per illumination pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketSequence<S: Scalar> {
    pub values: Vec<S>,
    pub noise_level: f64,
    pub normalized: bool,
}

impl<S: Scalar> BucketSequence<S> {
    pub fn new(values: Vec<S>) -> Self {
        Self { values, noise_level: 0.0, normalized: false }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Bucket detector model: reading i is the pattern-weighted sum of the
/// object transmission over all pixels.
pub fn compute_bucket_signals<S: Scalar>(
    patterns: &PatternStack<S>,
    object: &Image<S>,
) -> Result<BucketSequence<S>, OpticsError> {
    if patterns.width() != object.width() || patterns.height() != object.height() {
        return Err(OpticsError::DimensionMismatch(format!(
            "patterns are {}x{} but object is {}x{}",
            patterns.width(),
            patterns.height(),
            object.width(),
            object.height()
        )));
    }
    let obj = object.pixels();
    let values = patterns
        .patterns()
        .map(|p| p.iter().zip(obj).map(|(&a, &b)| a * b).sum())
        .collect();
    Ok(BucketSequence::new(values))
}

/// Adds a background-light term: each reading gains
/// `mu + 0.25 * mu * g_i` with `g_i` standard normal and
/// `mu = level * mean(values)`. An all-zero sequence is unchanged.
pub fn add_noise<S: Scalar>(
    buckets: &BucketSequence<S>,
    level: f64,
    seed: u64,
) -> Result<BucketSequence<S>, OpticsError> {
    if level < 0.0 {
        return Err(OpticsError::InvalidParameter(format!(
            "noise level {} must be nonnegative",
            level
        )));
    }
    if level == 0.0 || buckets.is_empty() {
        return Ok(buckets.clone());
    }
    let mean = buckets.values.iter().copied().sum::<S>().to_f64().unwrap()
        / buckets.len() as f64;
    let mu = level * mean;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = buckets
        .values
        .iter()
        .map(|&v| {
            let g = standard_normal(&mut rng);
            v + S::from_f64c(mu * (1.0 + 0.25 * g))
        })
        .collect();
    Ok(BucketSequence {
        values,
        noise_level: buckets.noise_level + level,
        normalized: buckets.normalized,
    })
}

/// Affine map of the readings onto `[0,1]`; idempotent, and rejected for
/// constant sequences where the map is undefined.
pub fn normalize_buckets<S: Scalar>(
    buckets: &BucketSequence<S>,
) -> Result<BucketSequence<S>, OpticsError> {
    if buckets.len() < 2 {
        return Err(OpticsError::InvalidParameter(
            "normalization needs at least two readings".into(),
        ));
    }
    let mut lo = S::infinity();
    let mut hi = S::neg_infinity();
    for &v in &buckets.values {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    if !(hi > lo) {
        return Err(OpticsError::ConstantSequence);
    }
    let span = hi - lo;
    let values = buckets.values.iter().map(|&v| (v - lo) / span).collect();
    Ok(BucketSequence { values, noise_level: buckets.noise_level, normalized: true })
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
