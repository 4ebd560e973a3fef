//! End-to-end finite-difference check: the teacher-forced loss gradient of a
//! tiny translation model, with respect to every parameter.

use ghostimg::autograd::AdamConfig;
use ghostimg::translator::{Model, ModelConfig, TokenSeq};

#[test]
fn tiny_model_loss_gradient_matches_finite_differences() {
    let config = ModelConfig {
        n_enc_layers: 1,
        n_dec_layers: 1,
        d_model: 16,
        n_heads: 4,
        d_ff: 32,
        width: 4,
        height: 4,
        max_src_len: 4,
    };
    let mut model: Model<f64> = Model::new(config, AdamConfig::default(), 3).unwrap();
    let buckets = [0.82, 0.11, 0.54, 0.37];
    let target = TokenSeq::from_tokens(vec![17, 3, 9, 14, 18], 16).unwrap();

    let (_, analytic) = model.loss_and_param_grads(&buckets, &target).unwrap();
    let base = model.flatten_params();
    assert_eq!(analytic.len(), base.len());

    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut worst_idx = 0;
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += h;
        model.load_flat_params(&plus).unwrap();
        let f_plus = model.loss(&buckets, &target).unwrap();

        let mut minus = base.clone();
        minus[i] -= h;
        model.load_flat_params(&minus).unwrap();
        let f_minus = model.loss(&buckets, &target).unwrap();

        let fd = (f_plus - f_minus) / (2.0 * h);
        let rel = (analytic[i] - fd).abs() / analytic[i].abs().max(fd.abs()).max(1e-6);
        if rel > worst {
            worst = rel;
            worst_idx = i;
        }
    }
    assert!(
        worst < 1e-3,
        "worst relative error {} at parameter {}",
        worst,
        worst_idx
    );
}
