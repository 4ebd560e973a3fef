use super::AutogradError;
use crate::scalar::Scalar;

/// Adam hyperparameters with a linear learning-rate warmup:
/// `lr(t) = lr_max * min(1, t / warmup_steps)`.
#[derive(Debug, Clone)]
pub struct AdamConfig<S: Scalar> {
    pub lr_max: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    pub warmup_steps: usize,
}

impl<S: Scalar> Default for AdamConfig<S> {
    fn default() -> Self {
        Self {
            lr_max: S::from_f64c(0.001),
            beta1: S::from_f64c(0.9),
            beta2: S::from_f64c(0.999),
            eps: S::from_f64c(1e-8),
            warmup_steps: 500,
        }
    }
}

/// Per-parameter first/second moments plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState<S: Scalar> {
    pub cfg: AdamConfig<S>,
    pub m: Vec<Vec<S>>,
    pub v: Vec<Vec<S>>,
    pub step: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(param_sizes: &[usize], cfg: AdamConfig<S>) -> Self {
        let m = param_sizes.iter().map(|&n| vec![S::zero(); n]).collect();
        let v = param_sizes.iter().map(|&n| vec![S::zero(); n]).collect();
        Self { cfg, m, v, step: 0 }
    }

    pub fn learning_rate_at(&self, step: u64) -> S {
        let warm = if self.cfg.warmup_steps == 0 {
            1.0
        } else {
            (step as f64 / self.cfg.warmup_steps as f64).min(1.0)
        };
        self.cfg.lr_max * S::from_f64c(warm)
    }

    /// One bias-corrected update over all parameters. `params[i]` and
    /// `grads[i]` must match the sizes the state was built with.
    pub fn step(
        &mut self,
        params: &mut [&mut [S]],
        grads: &[&[S]],
    ) -> Result<(), AutogradError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(AutogradError::InvalidParameter(format!(
                "optimizer tracks {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let lr = self.learning_rate_at(self.step);
        let t = self.step as i32;
        let one = S::one();
        let bc1 = one - self.cfg.beta1.powi(t);
        let bc2 = one - self.cfg.beta2.powi(t);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if param.len() != m.len() || grad.len() != m.len() {
                return Err(AutogradError::InvalidParameter(format!(
                    "parameter of {} values against state of {}",
                    param.len(),
                    m.len()
                )));
            }
            for j in 0..m.len() {
                let g = grad[j];
                m[j] = self.cfg.beta1 * m[j] + (one - self.cfg.beta1) * g;
                v[j] = self.cfg.beta2 * v[j] + (one - self.cfg.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                param[j] = param[j] - lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
            }
        }
        Ok(())
    }
}
