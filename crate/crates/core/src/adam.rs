//! Adam with bias correction; the only optimizer the reconstruction loop uses.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment buffers plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(weights: &[Tensor]) -> Self {
        AdamState {
            m: weights.iter().map(|w| Tensor::zeros(w.shape().to_vec())).collect(),
            v: weights.iter().map(|w| Tensor::zeros(w.shape().to_vec())).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update over all weight tensors.
    ///
    /// Rejects non-finite gradients: a NaN here means the training loss
    /// diverged and continuing would silently poison the moments.
    pub fn update(&mut self, weights: &mut [Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
        assert_eq!(weights.len(), grads.len(), "gradient list must match weight list");
        for (i, g) in grads.iter().enumerate() {
            if !g.is_finite() {
                return Err(Error::Divergence {
                    iteration: self.step as usize,
                    detail: format!("non-finite gradient for weight tensor {}", i),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);
        for ((w, g), (m, v)) in
            weights.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let wd = w.data_mut();
            let md = m.data_mut();
            let vd = v.data_mut();
            let gd = g.data();
            for j in 0..wd.len() {
                md[j] = BETA1 * md[j] + (1.0 - BETA1) * gd[j];
                vd[j] = BETA2 * vd[j] + (1.0 - BETA2) * gd[j] * gd[j];
                let m_hat = md[j] / bc1;
                let v_hat = vd[j] / bc2;
                wd[j] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
            }
        }
        Ok(())
    }
}
