use super::{mse, snr, ssim, MetricsError, SNR_SENTINEL_DB};
use crate::data::{Image, ImageSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct ImageMetrics {
    pub mse: f64,
    pub snr_db: f64,
    /// True when the SNR was clipped to the sentinel (identical images) or
    /// its negative (zero-intensity reconstruction).
    pub snr_capped: bool,
    pub ssim: f64,
    pub exact_match: bool,
    pub knn_correct: Option<bool>,
}

/// Per-image quality indicators for one reconstruction method, with
/// aggregates recomputed from the rows on demand.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub method: String,
    pub beta: f64,
    pub noise_level: f64,
    pub per_image: Vec<ImageMetrics>,
}

impl MetricReport {
    pub fn evaluate<S: Scalar>(
        method: &str,
        beta: f64,
        noise_level: f64,
        recons: &[Image<S>],
        truth: &ImageSet<S>,
    ) -> Result<Self, MetricsError> {
        if recons.is_empty() {
            return Err(MetricsError::EmptySet);
        }
        if recons.len() != truth.len() {
            return Err(MetricsError::DimensionMismatch(format!(
                "{} reconstructions vs {} truths",
                recons.len(),
                truth.len()
            )));
        }
        let mut per_image = Vec::with_capacity(recons.len());
        for (i, (recon, obj)) in recons.iter().zip(&truth.images).enumerate() {
            let mse_v = mse(recon, obj)?.to_f64().unwrap();
            let (snr_db, snr_capped) = match snr(recon, obj) {
                Ok(v) => (v.to_f64().unwrap(), false),
                Err(MetricsError::PerfectMatch) => (SNR_SENTINEL_DB, true),
                Err(MetricsError::ZeroSignal) => (-SNR_SENTINEL_DB, true),
                Err(e) => return Err(e),
            };
            let ssim_v = ssim(recon, obj)?.to_f64().unwrap();
            let exact = recon.pixels() == obj.pixels();
            let knn_correct = truth.labels.as_ref().map(|labels| {
                labels[super::nearest_index(recon, truth)] == labels[i]
            });
            per_image.push(ImageMetrics {
                mse: mse_v,
                snr_db,
                snr_capped,
                ssim: ssim_v,
                exact_match: exact,
                knn_correct,
            });
        }
        Ok(Self { method: method.to_string(), beta, noise_level, per_image })
    }

    pub fn mse_mean(&self) -> f64 {
        mean(self.per_image.iter().map(|m| m.mse))
    }

    pub fn mse_std(&self) -> f64 {
        std_dev(self.per_image.iter().map(|m| m.mse))
    }

    pub fn snr_mean(&self) -> f64 {
        mean(self.per_image.iter().map(|m| m.snr_db))
    }

    pub fn snr_std(&self) -> f64 {
        std_dev(self.per_image.iter().map(|m| m.snr_db))
    }

    pub fn ssim_mean(&self) -> f64 {
        mean(self.per_image.iter().map(|m| m.ssim))
    }

    pub fn ssim_std(&self) -> f64 {
        std_dev(self.per_image.iter().map(|m| m.ssim))
    }

    pub fn exact_match_rate(&self) -> f64 {
        mean(self.per_image.iter().map(|m| if m.exact_match { 1.0 } else { 0.0 }))
    }

    pub fn knn_rate(&self) -> Option<f64> {
        if self.per_image.iter().any(|m| m.knn_correct.is_none()) {
            return None;
        }
        Some(mean(self.per_image.iter().map(|m| {
            if m.knn_correct == Some(true) {
                1.0
            } else {
                0.0
            }
        })))
    }

    /// One row per image plus an aggregate footer.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# method={} beta={} noise={}\n",
            self.method, self.beta, self.noise_level
        ));
        out.push_str("index,mse,snr_db,snr_capped,ssim,exact_match,knn_correct\n");
        for (i, m) in self.per_image.iter().enumerate() {
            out.push_str(&format!(
                "{},{:.12},{:.6},{},{:.12},{},{}\n",
                i,
                m.mse,
                m.snr_db,
                m.snr_capped,
                m.ssim,
                m.exact_match,
                m.knn_correct.map(|b| b.to_string()).unwrap_or_default()
            ));
        }
        out.push_str(&format!(
            "# aggregate mse_mean={:.12} mse_std={:.12} snr_mean={:.6} snr_std={:.6} \
             ssim_mean={:.12} ssim_std={:.12} exact_match_rate={:.6} knn_rate={}\n",
            self.mse_mean(),
            self.mse_std(),
            self.snr_mean(),
            self.snr_std(),
            self.ssim_mean(),
            self.ssim_std(),
            self.exact_match_rate(),
            self.knn_rate().map(|r| format!("{:.6}", r)).unwrap_or_default()
        ));
        out
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let collected: Vec<f64> = values.collect();
    collected.iter().sum::<f64>() / collected.len() as f64
}

fn std_dev(values: impl Iterator<Item = f64>) -> f64 {
    let collected: Vec<f64> = values.collect();
    let mu = collected.iter().sum::<f64>() / collected.len() as f64;
    (collected.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / collected.len() as f64)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    #[test]
    fn aggregates_are_means_of_rows() {
        let t0 = Image::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let t1 = Image::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let truth =
            ImageSet::new(vec![t0.clone(), t1.clone()], Some(vec![0, 1]), Split::Test)
                .unwrap();
        let recons = vec![t0.clone(), Image::new(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap()];
        let report = MetricReport::evaluate("GT", 0.15, 0.0, &recons, &truth).unwrap();
        let mse_by_hand =
            (report.per_image[0].mse + report.per_image[1].mse) / 2.0;
        assert!((report.mse_mean() - mse_by_hand).abs() < 1e-12);
        assert_eq!(report.exact_match_rate(), 0.5);
        // first row matched exactly: SNR capped at the sentinel
        assert!(report.per_image[0].snr_capped);
        assert_eq!(report.per_image[0].snr_db, SNR_SENTINEL_DB);
    }

    #[test]
    fn csv_has_row_per_image_and_footer() {
        let t = Image::new(1, 2, vec![1.0, 0.0]).unwrap();
        let truth = ImageSet::new(vec![t.clone()], None, Split::Test).unwrap();
        let report = MetricReport::evaluate("CGI", 0.05, 0.096, &[t], &truth).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# method=CGI"));
        assert!(lines[1].starts_with("index,"));
        assert!(lines[2].starts_with("0,"));
        assert!(lines[3].starts_with("# aggregate"));
        assert_eq!(lines.len(), 4);
    }
}
