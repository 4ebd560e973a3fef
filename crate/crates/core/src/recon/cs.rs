//! L1-regularized reconstruction in the DCT basis, solved by FISTA with
//! monotone restart.
//!
//! The measurement constraint is relaxed to a penalized least-squares form:
//! `min_c 0.5 ||A idct2(c) - y||^2 + lambda ||c||_1`, where `A` maps an image
//! to its bucket readings.

use super::dct::DctBasis;
use super::ReconError;
use crate::data::Image;
use crate::optics::{BucketSequence, PatternStack};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct CsConfig<S: Scalar> {
    /// Sparsity weight; `None` selects `0.01 * ||A^T y||_inf` measured in the
    /// coefficient domain.
    pub lambda: Option<S>,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Clamp the reconstruction into `[0,1]` instead of min-max rescaling.
    pub nonneg: bool,
}

impl<S: Scalar> Default for CsConfig<S> {
    fn default() -> Self {
        Self { lambda: None, max_iters: 500, rel_tol: 1e-6, nonneg: true }
    }
}

#[derive(Debug, Clone)]
pub struct CsResult<S: Scalar> {
    pub image: Image<S>,
    /// Reconstructed field `idct2(c*)` before display conversion.
    pub field: Vec<S>,
    /// Solution coefficients in the DCT basis.
    pub coeffs: Vec<S>,
    pub lambda: S,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    /// Objective value per iteration, starting at the zero initializer.
    pub objective_trace: Vec<f64>,
}

pub fn cs_reconstruct<S: Scalar>(
    patterns: &PatternStack<S>,
    buckets: &BucketSequence<S>,
    cfg: &CsConfig<S>,
) -> Result<CsResult<S>, ReconError> {
    if patterns.len() != buckets.len() {
        return Err(ReconError::DimensionMismatch(format!(
            "{} patterns vs {} bucket readings",
            patterns.len(),
            buckets.len()
        )));
    }
    if patterns.width() != patterns.height() {
        return Err(ReconError::InvalidParameter(
            "DCT basis requires a square grid".into(),
        ));
    }
    if cfg.max_iters == 0 || !(cfg.rel_tol > 0.0) {
        return Err(ReconError::InvalidParameter(
            "max_iters must be >= 1 and rel_tol > 0".into(),
        ));
    }
    if let Some(l) = cfg.lambda {
        if !(l > S::zero()) {
            return Err(ReconError::InvalidParameter("lambda must be positive".into()));
        }
    }

    let n = patterns.width();
    let basis = DctBasis::new(n);
    let y = &buckets.values;

    let forward = |coeffs: &[S]| apply_patterns(patterns, &basis.idct2(coeffs));
    let adjoint = |residual: &[S]| basis.dct2(&adjoint_patterns(patterns, residual));

    let lambda = match cfg.lambda {
        Some(l) => l,
        None => {
            let aty = adjoint(y);
            let max = aty.iter().fold(S::zero(), |m, &v| m.max(v.abs()));
            (S::from_f64c(0.01) * max).max(S::from_f64c(1e-12))
        }
    };

    let mut lip = power_iteration_l(&forward, &adjoint, n * n);

    let objective = |coeffs: &[S]| -> f64 {
        let r = forward(coeffs);
        let data: S = r
            .iter()
            .zip(y)
            .map(|(&a, &b)| {
                let d = a - b;
                d * d
            })
            .sum();
        let l1: S = coeffs.iter().map(|&c| c.abs()).sum();
        0.5 * data.to_f64().unwrap() + (lambda * l1).to_f64().unwrap()
    };

    let dim = n * n;
    let mut x = vec![S::zero(); dim];
    let mut momentum_pt = x.clone();
    let mut t = 1.0f64;
    let mut f_prev = objective(&x);
    let mut trace = vec![f_prev];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        iterations += 1;
        let mut cand = prox_step(&forward, &adjoint, &momentum_pt, y, lambda, lip);
        let mut f_cand = objective(&cand);
        if f_cand > f_prev {
            // momentum overshoot: restart from the last accepted iterate,
            // growing L until the plain proximal step is a descent step
            t = 1.0;
            cand = prox_step(&forward, &adjoint, &x, y, lambda, lip);
            f_cand = objective(&cand);
            let mut doublings = 0;
            while f_cand > f_prev && doublings < 60 {
                lip = lip * S::from_f64c(2.0);
                cand = prox_step(&forward, &adjoint, &x, y, lambda, lip);
                f_cand = objective(&cand);
                doublings += 1;
            }
            if f_cand > f_prev {
                // numerically saturated; keep the previous iterate
                cand = x.clone();
                f_cand = f_prev;
            }
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = S::from_f64c((t - 1.0) / t_next);
        momentum_pt = cand
            .iter()
            .zip(&x)
            .map(|(&c, &old)| c + beta * (c - old))
            .collect();
        t = t_next;
        x = cand;
        trace.push(f_cand);
        let rel = (f_prev - f_cand).abs() / f_prev.abs().max(1e-30);
        f_prev = f_cand;
        if rel <= cfg.rel_tol {
            converged = true;
            break;
        }
    }

    let field = basis.idct2(&x);
    let image = if cfg.nonneg {
        let clamped: Vec<S> =
            field.iter().map(|&v| v.max(S::zero()).min(S::one())).collect();
        Image::new(n, n, clamped).expect("clamped field is in range")
    } else {
        Image::from_raw_field(n, n, &field).expect("field has grid dimensions")
    };

    Ok(CsResult {
        image,
        field,
        coeffs: x,
        lambda,
        iterations,
        converged,
        final_objective: f_prev,
        objective_trace: trace,
    })
}

/// `soft(v - grad/L, lambda/L)` evaluated at `v`.
fn prox_step<S: Scalar>(
    forward: &impl Fn(&[S]) -> Vec<S>,
    adjoint: &impl Fn(&[S]) -> Vec<S>,
    v: &[S],
    y: &[S],
    lambda: S,
    lip: S,
) -> Vec<S> {
    let mut residual = forward(v);
    for (r, &target) in residual.iter_mut().zip(y) {
        *r = *r - target;
    }
    let grad = adjoint(&residual);
    let step = S::one() / lip;
    let threshold = lambda / lip;
    v.iter()
        .zip(&grad)
        .map(|(&vi, &gi)| soft_threshold(vi - step * gi, threshold))
        .collect()
}

fn soft_threshold<S: Scalar>(v: S, threshold: S) -> S {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        S::zero()
    }
}

/// Largest eigenvalue of `A^T A` lifted through the basis, with a small
/// safety margin. Deterministic all-ones start.
fn power_iteration_l<S: Scalar>(
    forward: &impl Fn(&[S]) -> Vec<S>,
    adjoint: &impl Fn(&[S]) -> Vec<S>,
    dim: usize,
) -> S {
    let mut v = vec![S::one(); dim];
    let mut eig = S::zero();
    for _ in 0..80 {
        let av = adjoint(&forward(&v));
        let norm = av.iter().map(|&x| x * x).sum::<S>().sqrt();
        if !(norm > S::zero()) {
            break;
        }
        let new_eig = norm
            / v.iter().map(|&x| x * x).sum::<S>().sqrt();
        for (vi, &avi) in v.iter_mut().zip(&av) {
            *vi = avi / norm;
        }
        let rel = ((new_eig - eig) / new_eig.max(S::from_f64c(1e-30))).abs();
        eig = new_eig;
        if rel < S::from_f64c(1e-10) {
            break;
        }
    }
    (eig.max(S::from_f64c(1e-12))) * S::from_f64c(1.02)
}

pub(crate) fn apply_patterns<S: Scalar>(patterns: &PatternStack<S>, img: &[S]) -> Vec<S> {
    patterns
        .patterns()
        .map(|p| p.iter().zip(img).map(|(&a, &b)| a * b).sum())
        .collect()
}

pub(crate) fn adjoint_patterns<S: Scalar>(
    patterns: &PatternStack<S>,
    residual: &[S],
) -> Vec<S> {
    let mut out = vec![S::zero(); patterns.n_pixels()];
    for (i, p) in patterns.patterns().enumerate() {
        let r = residual[i];
        for (o, &v) in out.iter_mut().zip(p) {
            *o += r * v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{compute_bucket_signals, gen_rayleigh_speckles, SpeckleKind};
    use crate::data::SamplingConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_measurements_give_zero_image() {
        let data = vec![0.5f64; 3 * 16];
        let stack = PatternStack::from_data(4, 4, data, SpeckleKind::Imported, 0).unwrap();
        let buckets = BucketSequence::new(vec![0.0; 3]);
        let out = cs_reconstruct(&stack, &buckets, &CsConfig::default()).unwrap();
        assert!(out.coeffs.iter().all(|&c| c == 0.0));
        assert!(out.image.pixels().iter().all(|&p| p == 0.0));
        assert!(out.converged);
    }

    #[test]
    fn identity_patterns_recover_object() {
        // K = N with each pattern lighting exactly one pixel: the system is
        // fully determined and a tiny lambda must reproduce the object.
        let n = 4;
        let dim = n * n;
        let mut data = vec![0.0f64; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        let stack = PatternStack::from_data(n, n, data, SpeckleKind::Imported, 0).unwrap();
        let object: Vec<f64> =
            (0..dim).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let buckets = BucketSequence::new(object.clone());
        let cfg = CsConfig { lambda: Some(1e-8), max_iters: 2000, rel_tol: 1e-12, nonneg: true };
        let out = cs_reconstruct(&stack, &buckets, &cfg).unwrap();
        let err_num: f64 =
            out.field.iter().zip(&object).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let err_den: f64 = object.iter().map(|b| b * b).sum();
        let rel = (err_num / err_den).sqrt();
        assert!(rel < 1e-3, "relative error {}", rel);
    }

    #[test]
    fn objective_trace_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..20 {
            let n = 8;
            let k = 24;
            let data: Vec<f64> = (0..k * n * n).map(|_| rng.gen()).collect();
            let stack =
                PatternStack::from_data(n, n, data, SpeckleKind::Imported, trial).unwrap();
            let values: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() * 4.0).collect();
            let buckets = BucketSequence::new(values);
            let out = cs_reconstruct(&stack, &buckets, &CsConfig::default()).unwrap();
            for w in out.objective_trace.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12,
                    "trial {}: objective rose {} -> {}",
                    trial,
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn solution_satisfies_subgradient_optimality() {
        // on zero coefficients the gradient magnitude must not exceed lambda
        let cfg_s = SamplingConfig::new(64, 0.5).unwrap();
        let stack: PatternStack<f64> =
            gen_rayleigh_speckles(&cfg_s, 8, 8, 2.0, 31).unwrap();
        let object = Image::new(
            8,
            8,
            (0..64).map(|i| if (i / 8 + i % 8) % 4 == 0 { 1.0 } else { 0.0 }).collect(),
        )
        .unwrap();
        let buckets = compute_bucket_signals(&stack, &object).unwrap();
        let cfg = CsConfig { max_iters: 4000, rel_tol: 1e-14, ..CsConfig::default() };
        let out = cs_reconstruct(&stack, &buckets, &cfg).unwrap();

        let basis = DctBasis::new(8);
        let mut residual = apply_patterns(&stack, &basis.idct2(&out.coeffs));
        for (r, &b) in residual.iter_mut().zip(&buckets.values) {
            *r -= b;
        }
        let grad = basis.dct2(&adjoint_patterns(&stack, &residual));
        let tol = 1e-4 * out.lambda.max(1.0);
        for (i, (&c, &g)) in out.coeffs.iter().zip(&grad).enumerate() {
            if c == 0.0 {
                assert!(
                    g.abs() <= out.lambda + tol,
                    "coeff {}: |grad| {} > lambda {}",
                    i,
                    g.abs(),
                    out.lambda
                );
            } else {
                assert!(
                    (g + c.signum() * out.lambda).abs() <= 1e-3,
                    "coeff {}: stationarity residual {}",
                    i,
                    (g + c.signum() * out.lambda).abs()
                );
            }
        }
    }

    #[test]
    fn flags_non_convergence_and_still_returns() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 8;
        let k = 20;
        let data: Vec<f64> = (0..k * n * n).map(|_| rng.gen()).collect();
        let stack = PatternStack::from_data(n, n, data, SpeckleKind::Imported, 0).unwrap();
        let values: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
        let cfg = CsConfig { max_iters: 2, rel_tol: 1e-14, ..CsConfig::default() };
        let out = cs_reconstruct(&stack, &BucketSequence::new(values), &cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
