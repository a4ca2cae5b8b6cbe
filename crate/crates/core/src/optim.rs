//! Adam with bias correction, plus the step-decay learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    /// β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one bias-corrected Adam update to every tensor in `params`.
    ///
    /// Moments are allocated on the first call and must keep their shapes
    /// afterwards. A non-finite gradient aborts before anything is modified.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        check_dim(params.len(), grads.len())?;
        for (p, g) in params.iter().zip(grads) {
            check_dim(p.len(), g.len())?;
        }
        for (tensor, g) in grads.iter().enumerate() {
            if let Some(index) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    tensor,
                    index,
                    value: g[index],
                    step: self.step + 1,
                });
            }
        }
        if self.first_moment.is_empty() {
            self.first_moment = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second_moment = self.first_moment.clone();
        } else {
            check_dim(self.first_moment.len(), grads.len())?;
            for (m, g) in self.first_moment.iter().zip(grads) {
                check_dim(m.len(), g.len())?;
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// `base_lr · factor^⌊epoch / decay_every⌋`.
pub fn lr_schedule(base_lr: f64, epoch: usize, decay_every: usize, factor: f64) -> f64 {
    debug_assert!(decay_every >= 1 && factor > 0.0 && factor <= 1.0);
    base_lr * factor.powi((epoch / decay_every.max(1)) as i32)
}
