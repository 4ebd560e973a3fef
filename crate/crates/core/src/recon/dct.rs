//! Orthonormal type-II 2-D DCT, the sparsity basis for compressed sensing.

use crate::linalg::{matmul, transpose};
use crate::scalar::Scalar;

/// Precomputed n x n orthonormal DCT-II matrix and its transpose.
#[derive(Debug, Clone)]
pub struct DctBasis<S: Scalar> {
    n: usize,
    forward: Vec<S>,  // C
    backward: Vec<S>, // C^T
}

impl<S: Scalar> DctBasis<S> {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "basis size must be positive");
        let mut forward = vec![S::zero(); n * n];
        let nf = n as f64;
        for k in 0..n {
            let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            for j in 0..n {
                let angle = std::f64::consts::PI * (2.0 * j as f64 + 1.0) * k as f64
                    / (2.0 * nf);
                forward[k * n + j] = S::from_f64c(scale * angle.cos());
            }
        }
        let backward = transpose(&forward, n, n);
        Self { n, forward, backward }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// C * X * C^T for a row-major n x n image.
    pub fn dct2(&self, image: &[S]) -> Vec<S> {
        assert_eq!(image.len(), self.n * self.n, "dct2 needs a square n x n grid");
        let cx = matmul(&self.forward, image, self.n, self.n, self.n);
        matmul(&cx, &self.backward, self.n, self.n, self.n)
    }

    /// C^T * Y * C, the exact inverse of [`DctBasis::dct2`].
    pub fn idct2(&self, coeffs: &[S]) -> Vec<S> {
        assert_eq!(coeffs.len(), self.n * self.n, "idct2 needs a square n x n grid");
        let cy = matmul(&self.backward, coeffs, self.n, self.n, self.n);
        matmul(&cy, &self.forward, self.n, self.n, self.n)
    }
}

/// One-shot forward transform of a square image.
pub fn dct2<S: Scalar>(image: &[S], n: usize) -> Vec<S> {
    DctBasis::new(n).dct2(image)
}

/// One-shot inverse transform of square coefficients.
pub fn idct2<S: Scalar>(coeffs: &[S], n: usize) -> Vec<S> {
    DctBasis::new(n).idct2(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_image_concentrates_in_dc() {
        let n = 8;
        let c = 0.7f64;
        let coeffs = dct2(&vec![c; n * n], n);
        assert!((coeffs[0] - c * n as f64).abs() < 1e-12);
        for (i, &v) in coeffs.iter().enumerate().skip(1) {
            assert!(v.abs() < 1e-12, "coefficient {} = {}", i, v);
        }
    }

    #[test]
    fn inverse_recovers_random_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &n in &[4usize, 8, 16, 32] {
            let x: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>()).collect();
            let back = idct2(&dct2(&x, n), n);
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn parseval_energy_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 16;
        let x: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let c = dct2(&x, n);
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ec: f64 = c.iter().map(|v| v * v).sum();
        assert!((ex - ec).abs() < 1e-10, "energy {} vs {}", ex, ec);
    }
}
