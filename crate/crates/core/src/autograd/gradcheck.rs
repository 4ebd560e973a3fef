//! Finite-difference verification for the backward rules.

use super::tape::{Tape, TensorId};
use super::AutogradError;
use crate::scalar::Scalar;

/// Compares the reverse-mode gradient of a scalar-valued function against
/// central finite differences and returns the worst relative error.
///
/// `f` must build a scalar from the supplied leaf; it runs once per
/// perturbed coordinate, each time on a fresh tape.
pub fn grad_check<S, F>(f: F, x0: &[S], shape: &[usize], h: S) -> Result<S, AutogradError>
where
    S: Scalar,
    F: Fn(&mut Tape<S>, TensorId) -> Result<TensorId, AutogradError>,
{
    let h_f64 = h.to_f64().unwrap_or(0.0);
    if !(1e-6..=1e-3).contains(&h_f64) {
        return Err(AutogradError::InvalidParameter(format!(
            "step size {} outside [1e-6, 1e-3]",
            h_f64
        )));
    }

    let analytic = {
        let mut tape = Tape::new();
        let x = tape.leaf(shape, x0.to_vec(), true)?;
        let loss = f(&mut tape, x)?;
        tape.backward(loss)?;
        tape.grad(x)
            .map(|g| g.to_vec())
            .unwrap_or_else(|| vec![S::zero(); x0.len()])
    };

    let eval = |values: Vec<S>| -> Result<S, AutogradError> {
        let mut tape = Tape::new();
        let x = tape.leaf(shape, values, false)?;
        let loss = f(&mut tape, x)?;
        Ok(tape.data(loss)[0])
    };

    let two_h = h + h;
    let floor = S::from_f64c(1e-6);
    let mut worst = S::zero();
    for i in 0..x0.len() {
        let mut plus = x0.to_vec();
        plus[i] += h;
        let mut minus = x0.to_vec();
        minus[i] -= h;
        let fd = (eval(plus)? - eval(minus)?) / two_h;
        let g = analytic[i];
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(floor);
        if rel > worst {
            worst = rel;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
    }

    #[test]
    fn sum_is_exact() {
        let err = grad_check(
            |t, x| t.sum(x),
            &[1.0f64, -2.0, 3.0, 0.25],
            &[4],
            1e-4,
        )
        .unwrap();
        assert!(err < 1e-9, "error {}", err);
    }

    #[test]
    fn rejects_out_of_range_step() {
        assert!(grad_check(|t, x| t.sum(x), &[1.0f64], &[1], 1e-2).is_err());
        assert!(grad_check(|t, x| t.sum(x), &[1.0f64], &[1], 1e-7).is_err());
    }

    /// Every registered op, composed into a scalar through sum, stays under
    /// 1e-4 relative error on random inputs.
    #[test]
    fn all_ops_pass_finite_difference_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let w = random_vec(&mut rng, 12); // 4x3
        let b = random_vec(&mut rng, 3);
        let other = random_vec(&mut rng, 8); // 2x4
        let gain = random_vec(&mut rng, 4);
        let bias = random_vec(&mut rng, 4);

        type Builder = Box<
            dyn Fn(&mut Tape<f64>, TensorId) -> Result<TensorId, AutogradError>,
        >;
        let w1 = w.clone();
        let other1 = other.clone();
        let other2 = other.clone();
        let b1 = b.clone();
        let gain1 = gain.clone();
        let bias1 = bias.clone();
        let cases: Vec<(&str, Vec<usize>, Builder)> = vec![
            ("matmul", vec![2, 4], Box::new(move |t, x| {
                let w = t.leaf(&[4, 3], w1.clone(), true)?;
                let y = t.matmul(x, w)?;
                t.sum(y)
            })),
            ("add_mul", vec![2, 4], Box::new(move |t, x| {
                let o = t.leaf(&[2, 4], other1.clone(), true)?;
                let a = t.add(x, o)?;
                let m = t.mul(a, x)?;
                t.sum(m)
            })),
            ("scale", vec![2, 4], Box::new(|t, x| {
                let s = t.scale(x, -1.75)?;
                t.sum(s)
            })),
            ("transpose_reshape", vec![2, 4], Box::new(|t, x| {
                let tr = t.transpose(x)?;
                let rs = t.reshape(tr, &[2, 4])?;
                let m = t.mul(rs, rs)?;
                t.sum(m)
            })),
            ("concat_slice", vec![2, 4], Box::new(move |t, x| {
                let o = t.leaf(&[2, 4], other2.clone(), true)?;
                let c = t.concat_cols(&[x, o])?;
                let s = t.col_slice(c, 2, 4)?;
                let m = t.mul(s, s)?;
                t.sum(m)
            })),
            ("embedding", vec![3, 2], Box::new(|t, x| {
                let rows = t.embedding_rows(x, &[2, 0, 2, 1])?;
                let m = t.mul(rows, rows)?;
                t.sum(m)
            })),
            ("masked_softmax", vec![2, 4], Box::new(|t, x| {
                let mask = [false, true, false, false, false, false, true, false];
                let mf = t.masked_fill(x, &mask)?;
                let sm = t.softmax(mf)?;
                let sq = t.mul(sm, sm)?;
                t.sum(sq)
            })),
            ("softmax", vec![2, 4], Box::new(|t, x| {
                let sm = t.softmax(x)?;
                let sq = t.mul(sm, sm)?;
                t.sum(sq)
            })),
            ("layer_norm", vec![2, 4], Box::new(move |t, x| {
                let g = t.leaf(&[4], gain1.clone(), true)?;
                let b = t.leaf(&[4], bias1.clone(), true)?;
                let ln = t.layer_norm(x, g, b)?;
                let sq = t.mul(ln, ln)?;
                t.sum(sq)
            })),
            ("relu", vec![2, 4], Box::new(|t, x| {
                let r = t.relu(x)?;
                let sq = t.mul(r, r)?;
                t.sum(sq)
            })),
            ("affine", vec![2, 4], Box::new(move |t, x| {
                let w = t.leaf(&[4, 3], w.clone(), true)?;
                let b = t.leaf(&[3], b1.clone(), true)?;
                let y = t.affine(x, w, b)?;
                let sq = t.mul(y, y)?;
                t.sum(sq)
            })),
            ("cross_entropy", vec![3, 5], Box::new(|t, x| {
                t.cross_entropy_masked(x, &[1, 0, 4], 0)
            })),
        ];

        for (name, shape, build) in cases {
            let n: usize = shape.iter().product();
            let x0 = random_vec(&mut rng, n);
            let err = grad_check(build.as_ref(), &x0, &shape, 1e-5).unwrap();
            assert!(err < 1e-4, "{}: relative error {}", name, err);
        }
    }

    /// Gradients also reach non-input leaves (weights) correctly; checked by
    /// differentiating with respect to the weight of an affine layer.
    #[test]
    fn weight_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x_data = random_vec(&mut rng, 8);
        let x_data2 = x_data.clone();
        let err = grad_check(
            move |t, w| {
                let x = t.leaf(&[2, 4], x_data2.clone(), false)?;
                let b = t.leaf(&[3], vec![0.1, -0.2, 0.3], false)?;
                let y = t.affine(x, w, b)?;
                let sm = t.softmax(y)?;
                t.cross_entropy_masked(sm, &[2, 1], 0)
            },
            &random_vec(&mut rng, 12),
            &[4, 3],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "error {}", err);
    }
}
