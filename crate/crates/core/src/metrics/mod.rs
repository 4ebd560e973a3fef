//! Image-quality indicators (MSE, SNR, SSIM), exact-match / nearest-neighbor
//! accuracy, and batch evaluation reports.

mod report;

pub use report::{ImageMetrics, MetricReport};

use thiserror::Error;

use crate::data::{Image, ImageSet};
use crate::scalar::Scalar;

/// dB value reported in place of an infinite SNR (identical images).
pub const SNR_SENTINEL_DB: f64 = 120.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("images are identical; SNR is unbounded")]
    PerfectMatch,
    #[error("reconstruction has zero total intensity")]
    ZeroSignal,
    #[error("labels are required for nearest-neighbor accuracy")]
    MissingLabels,
    #[error("empty input")]
    EmptySet,
}

fn check_dims<S: Scalar>(a: &Image<S>, b: &Image<S>) -> Result<(), MetricsError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Mean of squared pixel differences.
pub fn mse<S: Scalar>(recon: &Image<S>, truth: &Image<S>) -> Result<S, MetricsError> {
    check_dims(recon, truth)?;
    let n = S::from_f64c(recon.n_pixels() as f64);
    let sum: S = recon
        .pixels()
        .iter()
        .zip(truth.pixels())
        .map(|(&a, &b)| {
            let d = a - b;
            d * d
        })
        .sum();
    Ok(sum / n)
}

/// `10 log10( sum(recon) / sum |recon - truth| )` in dB.
pub fn snr<S: Scalar>(recon: &Image<S>, truth: &Image<S>) -> Result<S, MetricsError> {
    check_dims(recon, truth)?;
    let signal: S = recon.pixels().iter().copied().sum();
    let error: S = recon
        .pixels()
        .iter()
        .zip(truth.pixels())
        .map(|(&a, &b)| (a - b).abs())
        .sum();
    if error == S::zero() {
        return Err(MetricsError::PerfectMatch);
    }
    if signal == S::zero() {
        return Err(MetricsError::ZeroSignal);
    }
    Ok(S::from_f64c(10.0) * (signal / error).log10())
}

/// Global single-window SSIM with `c1 = (0.01 L)^2`, `c2 = (0.03 L)^2` for
/// the unit dynamic range, using population statistics over the full image.
pub fn ssim<S: Scalar>(recon: &Image<S>, truth: &Image<S>) -> Result<S, MetricsError> {
    check_dims(recon, truth)?;
    let n = S::from_f64c(recon.n_pixels() as f64);
    let a = recon.pixels();
    let b = truth.pixels();
    let mean_a = a.iter().copied().sum::<S>() / n;
    let mean_b = b.iter().copied().sum::<S>() / n;
    let mut var_a = S::zero();
    let mut var_b = S::zero();
    let mut cov = S::zero();
    for (&x, &y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        var_a += da * da;
        var_b += db * db;
        cov += da * db;
    }
    var_a = var_a / n;
    var_b = var_b / n;
    cov = cov / n;
    let c1 = S::from_f64c(0.01 * 0.01);
    let c2 = S::from_f64c(0.03 * 0.03);
    let two = S::from_f64c(2.0);
    Ok(((two * mean_a * mean_b + c1) * (two * cov + c2))
        / ((mean_a * mean_a + mean_b * mean_b + c1) * (var_a + var_b + c2)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    /// Fraction of reconstructions whose pixel set equals the ground truth.
    pub exact_match_rate: f64,
    /// Fraction whose nearest ground-truth image (L1 distance, Hamming on
    /// binary images) carries the true label; `None` without labels.
    pub knn_rate: Option<f64>,
}

pub fn accuracy<S: Scalar>(
    recons: &[Image<S>],
    truth: &ImageSet<S>,
) -> Result<AccuracyReport, MetricsError> {
    if recons.is_empty() || recons.len() != truth.len() {
        return Err(MetricsError::DimensionMismatch(format!(
            "{} reconstructions vs {} ground-truth images",
            recons.len(),
            truth.len()
        )));
    }
    for (r, t) in recons.iter().zip(&truth.images) {
        check_dims(r, t)?;
    }
    let exact = recons
        .iter()
        .zip(&truth.images)
        .filter(|(r, t)| r.pixels() == t.pixels())
        .count();
    let exact_match_rate = exact as f64 / recons.len() as f64;
    let knn_rate = match &truth.labels {
        None => None,
        Some(labels) => {
            let correct = recons
                .iter()
                .enumerate()
                .filter(|(i, r)| labels[nearest_index(r, truth)] == labels[*i])
                .count();
            Some(correct as f64 / recons.len() as f64)
        }
    };
    Ok(AccuracyReport { exact_match_rate, knn_rate })
}

/// Nearest-neighbor label accuracy alone; errors without labels.
pub fn knn_label_rate<S: Scalar>(
    recons: &[Image<S>],
    truth: &ImageSet<S>,
) -> Result<f64, MetricsError> {
    accuracy(recons, truth)?
        .knn_rate
        .ok_or(MetricsError::MissingLabels)
}

pub(crate) fn nearest_index<S: Scalar>(recon: &Image<S>, truth: &ImageSet<S>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, candidate) in truth.images.iter().enumerate() {
        let d: f64 = recon
            .pixels()
            .iter()
            .zip(candidate.pixels())
            .map(|(&a, &b)| (a - b).abs().to_f64().unwrap())
            .sum();
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    fn img(pixels: &[f64], w: usize) -> Image<f64> {
        Image::new(w, pixels.len() / w, pixels.to_vec()).unwrap()
    }

    #[test]
    fn mse_hand_cases() {
        let zero = img(&[0.0, 0.0, 0.0, 0.0], 2);
        let one_bit = img(&[1.0, 0.0, 0.0, 0.0], 2);
        assert_eq!(mse(&one_bit, &zero).unwrap(), 0.25);
        assert_eq!(mse(&zero, &one_bit).unwrap(), 0.25); // symmetric
        assert_eq!(mse(&one_bit, &one_bit).unwrap(), 0.0);
    }

    #[test]
    fn snr_hand_cases() {
        let a = img(&[1.0, 1.0], 2);
        let b = img(&[1.0, 0.0], 2);
        // 10 log10(2 / 1)
        assert!((snr(&a, &b).unwrap() - 10.0 * 2.0f64.log10()).abs() < 1e-12);

        let half = img(&[0.5, 0.5], 2);
        let zero = img(&[0.0, 0.0], 2);
        assert!((snr(&half, &zero).unwrap() - 0.0).abs() < 1e-12);

        assert!(matches!(snr(&a, &a), Err(MetricsError::PerfectMatch)));
        assert!(matches!(snr(&zero, &b), Err(MetricsError::ZeroSignal)));
    }

    #[test]
    fn snr_is_scale_invariant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let a: Vec<f64> = (0..16).map(|_| rng.gen()).collect();
            let b: Vec<f64> = (0..16).map(|_| rng.gen()).collect();
            let scale: f64 = rng.gen::<f64>() * 0.9 + 0.05;
            let sa: Vec<f64> = a.iter().map(|&v| v * scale).collect();
            let sb: Vec<f64> = b.iter().map(|&v| v * scale).collect();
            let base = snr(&img(&a, 4), &img(&b, 4)).unwrap();
            let scaled = snr(&img(&sa, 4), &img(&sb, 4)).unwrap();
            assert!((base - scaled).abs() < 1e-10);
        }
    }

    #[test]
    fn ssim_identical_is_one() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a: Vec<f64> = (0..16).map(|_| rng.gen()).collect();
            let ia = img(&a, 4);
            assert!((ssim(&ia, &ia).unwrap() - 1.0).abs() < 1e-12);
        }
        let flat = img(&[0.3; 16], 4);
        assert!((ssim(&flat, &flat).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_matches_direct_formula_on_inverted_image() {
        // binary image with mean exactly 0.5; its inversion has cov = -var
        let a: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let b: Vec<f64> = a.iter().map(|&v| 1.0 - v).collect();
        let computed = ssim(&img(&a, 4), &img(&b, 4)).unwrap();

        let (c1, c2) = (0.01f64 * 0.01, 0.03f64 * 0.03);
        let (mu_a, mu_b, var, cov) = (0.5, 0.5, 0.25, -0.25);
        let expected = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
            / ((mu_a * mu_a + mu_b * mu_b + c1) * (var + var + c2));
        assert!((computed - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_is_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let a: Vec<f64> = (0..25).map(|_| rng.gen()).collect();
            let b: Vec<f64> = (0..25).map(|_| rng.gen()).collect();
            let x = ssim(&img(&a, 5), &img(&b, 5)).unwrap();
            let y = ssim(&img(&b, 5), &img(&a, 5)).unwrap();
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn mse_zero_iff_equal_on_binary() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let a: Vec<f64> =
                (0..16).map(|_| if rng.gen::<bool>() { 1.0 } else { 0.0 }).collect();
            let mut b = a.clone();
            assert_eq!(mse(&img(&a, 4), &img(&b, 4)).unwrap(), 0.0);
            let flip = rng.gen_range(0..16);
            b[flip] = 1.0 - b[flip];
            assert!(mse(&img(&a, 4), &img(&b, 4)).unwrap() > 0.0);
        }
    }

    #[test]
    fn accuracy_on_identical_sets_is_perfect() {
        let truths = vec![
            img(&[1.0, 0.0, 0.0, 0.0], 2),
            img(&[0.0, 1.0, 1.0, 0.0], 2),
        ];
        let set = ImageSet::new(truths.clone(), Some(vec![3, 7]), Split::Test).unwrap();
        let report = accuracy(&truths, &set).unwrap();
        assert_eq!(report.exact_match_rate, 1.0);
        assert_eq!(report.knn_rate, Some(1.0));
    }

    #[test]
    fn all_zero_reconstructions_have_zero_exact_match() {
        let truths = vec![img(&[1.0, 0.0, 0.0, 1.0], 2), img(&[0.0, 1.0, 0.0, 1.0], 2)];
        let set = ImageSet::new(truths, None, Split::Test).unwrap();
        let zeros = vec![img(&[0.0; 4], 2), img(&[0.0; 4], 2)];
        let report = accuracy(&zeros, &set).unwrap();
        assert_eq!(report.exact_match_rate, 0.0);
        assert_eq!(report.knn_rate, None);
    }

    #[test]
    fn single_flipped_pixel_breaks_exact_match_not_knn() {
        // two clearly separated classes
        let t0 = img(&[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0], 4);
        let t1 = img(&[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0], 4);
        let set =
            ImageSet::new(vec![t0.clone(), t1.clone()], Some(vec![0, 1]), Split::Test)
                .unwrap();
        let mut flipped = t0.pixels().to_vec();
        flipped[0] = 0.0;
        let recons = vec![img(&flipped, 4), t1];
        let report = accuracy(&recons, &set).unwrap();
        assert_eq!(report.exact_match_rate, 0.5);
        assert_eq!(report.knn_rate, Some(1.0));
        assert!(matches!(
            knn_label_rate(&recons, &ImageSet::new(set.images.clone(), None, Split::Test).unwrap()),
            Err(MetricsError::MissingLabels)
        ));
    }
}
