//! Statistical diagnostics for pattern stacks: speckle contrast and the
//! radially averaged power spectrum.

use num_complex::Complex;

use super::fft2::fft2_inplace;
use super::speckle::PatternStack;
use crate::scalar::Scalar;

/// Contrast sigma/mu over every pixel of every pattern.
pub fn speckle_contrast<S: Scalar>(stack: &PatternStack<S>) -> f64 {
    let values = stack.data();
    let n = values.len() as f64;
    let mean = values.iter().map(|v| v.to_f64().unwrap()).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|v| {
            let d = v.to_f64().unwrap() - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    var.sqrt() / mean
}

/// Ensemble-averaged radial power spectrum. Each pattern is mean-subtracted,
/// transformed, and |F|^2 is accumulated into integer-rounded radial bins;
/// the DC bin is dropped. Returns (frequency, power) pairs.
pub fn radial_power_spectrum<S: Scalar>(stack: &PatternStack<S>) -> Vec<(f64, f64)> {
    let w = stack.width();
    let h = stack.height();
    let f_max = (w.min(h) / 2) as usize;
    let mut sums = vec![0.0f64; f_max + 1];
    let mut counts = vec![0usize; f_max + 1];

    let mut grid = vec![Complex::new(S::zero(), S::zero()); w * h];
    for pattern in stack.patterns() {
        let mean =
            pattern.iter().map(|v| v.to_f64().unwrap()).sum::<f64>() / pattern.len() as f64;
        for (g, &p) in grid.iter_mut().zip(pattern) {
            *g = Complex::new(p - S::from_f64c(mean), S::zero());
        }
        fft2_inplace(&mut grid, w, h);
        for v in 0..h {
            for u in 0..w {
                let fu = u.min(w - u) as f64;
                let fv = v.min(h - v) as f64;
                let f = (fu * fu + fv * fv).sqrt();
                let bin = f.round() as usize;
                if bin >= 1 && bin <= f_max {
                    let z = grid[v * w + u];
                    let p = (z.re * z.re + z.im * z.im).to_f64().unwrap();
                    sums[bin] += p;
                    counts[bin] += 1;
                }
            }
        }
    }
    (1..=f_max)
        .filter(|&b| counts[b] > 0)
        .map(|b| (b as f64, sums[b] / counts[b] as f64))
        .collect()
}

/// Least-squares slope of log power vs log frequency over the radial
/// spectrum, excluding the Nyquist bin where the grid anisotropy bites.
pub fn radial_power_slope<S: Scalar>(stack: &PatternStack<S>) -> f64 {
    let spectrum = radial_power_spectrum(stack);
    let f_cut = (stack.width().min(stack.height()) / 2) as f64 - 1.0;
    let points: Vec<(f64, f64)> = spectrum
        .into_iter()
        .filter(|&(f, p)| f <= f_cut && p > 0.0)
        .map(|(f, p)| (f.ln(), p.ln()))
        .collect();
    fit_slope(&points)
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::speckle::SpeckleKind;

    /// Builds a stack whose spectrum is an exact power law directly in the
    /// frequency domain, bypassing the generators, to validate the slope
    /// estimator itself.
    fn exact_power_law_stack(exponent: f64, k: usize, seed: u64) -> PatternStack<f64> {
        use rand::{Rng, SeedableRng};
        let (w, h) = (32usize, 32usize);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(k * w * h);
        for _ in 0..k {
            let mut grid = vec![Complex::new(0.0f64, 0.0); w * h];
            for v in 0..h {
                for u in 0..w {
                    let fu = u.min(w - u) as f64;
                    let fv = v.min(h - v) as f64;
                    let f = (fu * fu + fv * fv).sqrt();
                    if f > 0.0 {
                        let phase = rng.gen::<f64>() * std::f64::consts::TAU;
                        let amp = f.powf(-exponent / 2.0);
                        grid[v * w + u] =
                            Complex::new(amp * phase.cos(), amp * phase.sin());
                    }
                }
            }
            super::super::fft2::ifft2_inplace(&mut grid, w, h);
            let lo = grid.iter().map(|z| z.re).fold(f64::MAX, f64::min);
            let hi = grid.iter().map(|z| z.re).fold(f64::MIN, f64::max);
            for z in &grid {
                data.push((z.re - lo) / (hi - lo));
            }
        }
        PatternStack::from_data(w, h, data, SpeckleKind::Imported, seed).unwrap()
    }

    #[test]
    fn slope_estimator_recovers_known_exponents() {
        for &alpha in &[0.5, 1.0, 2.0] {
            let stack = exact_power_law_stack(alpha, 40, 17);
            let slope = radial_power_slope(&stack);
            assert!(
                (slope + alpha).abs() < 0.15,
                "exponent {}: slope {}",
                alpha,
                slope
            );
        }
    }

    #[test]
    fn contrast_of_constant_stack_is_zero() {
        let data = vec![0.5f64; 2 * 16];
        let stack = PatternStack::from_data(4, 4, data, SpeckleKind::Imported, 0).unwrap();
        assert_eq!(speckle_contrast(&stack), 0.0);
    }
}
