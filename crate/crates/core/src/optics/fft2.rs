use num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::Scalar;

/// Unnormalized inverse 2-D FFT over a row-major `width x height` grid.
pub(crate) fn ifft2_inplace<S: Scalar>(grid: &mut [Complex<S>], width: usize, height: usize) {
    debug_assert_eq!(grid.len(), width * height);
    let mut planner = FftPlanner::<S>::new();
    let row_fft = planner.plan_fft_inverse(width);
    let col_fft = planner.plan_fft_inverse(height);

    for row in grid.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::new(S::zero(), S::zero()); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = grid[y * width + x];
        }
        col_fft.process(&mut column);
        for y in 0..height {
            grid[y * width + x] = column[y];
        }
    }
}

/// Unnormalized forward 2-D FFT, used by the spectrum diagnostics.
pub(crate) fn fft2_inplace<S: Scalar>(grid: &mut [Complex<S>], width: usize, height: usize) {
    debug_assert_eq!(grid.len(), width * height);
    let mut planner = FftPlanner::<S>::new();
    let row_fft = planner.plan_fft_forward(width);
    let col_fft = planner.plan_fft_forward(height);

    for row in grid.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::new(S::zero(), S::zero()); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = grid[y * width + x];
        }
        col_fft.process(&mut column);
        for y in 0..height {
            grid[y * width + x] = column[y];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_then_inverse_is_scaled_identity() {
        let (w, h) = (8, 4);
        let mut grid: Vec<Complex<f64>> = (0..w * h)
            .map(|i| Complex::new((i % 7) as f64, (i % 3) as f64))
            .collect();
        let original = grid.clone();
        fft2_inplace(&mut grid, w, h);
        ifft2_inplace(&mut grid, w, h);
        let scale = (w * h) as f64;
        for (a, b) in grid.iter().zip(&original) {
            assert!((a.re / scale - b.re).abs() < 1e-12);
            assert!((a.im / scale - b.im).abs() < 1e-12);
        }
    }
}
