//! Bias-corrected adaptive-moment (Adam) optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment accumulators for one parameter set.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Self {
        Self {
            config,
            step: 0,
            m: params.iter().map(|p| Tensor::zeros_like(p)).collect(),
            v: params.iter().map(|p| Tensor::zeros_like(p)).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// One descent step `p <- p - lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return contract(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            ));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if !p.same_shape(g) || !p.same_shape(m) {
                return contract(format!("shape mismatch: param {:?}, grad {:?}", p.shape(), g.shape()));
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let pd = p.data_mut();
            for (((pi, &gi), mi), vi) in pd.iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *pi -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Tensor::matrix(1, 3, vec![1.0, -2.0, 0.5]).unwrap();
        let before = p.clone();
        let mut opt = Adam::new(AdamConfig::with_lr(0.1), &[&p]);
        for _ in 0..5 {
            opt.step(&mut [&mut p], &[Tensor::zeros(&[1, 3])]).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(opt.steps(), 5);
    }

    #[test]
    fn first_step_is_sign_magnitude() {
        // After bias correction m_hat = g and v_hat = g^2.
        let (p0, g) = (1.5, -0.37);
        let mut p = Tensor::scalar(p0);
        let mut opt = Adam::new(AdamConfig::with_lr(0.1), &[&p]);
        opt.step(&mut [&mut p], &[Tensor::scalar(g)]).unwrap();
        let expected = p0 - 0.1 * g / (g.abs() + 1e-8);
        assert!((p.item() - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut p = Tensor::matrix(1, 2, vec![3.0, 4.0]).unwrap();
        let before = p.clone();
        let mut opt = Adam::new(AdamConfig::with_lr(0.0), &[&p]);
        opt.step(&mut [&mut p], &[Tensor::matrix(1, 2, vec![1.0, -9.0]).unwrap()]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn minimizes_a_parabola() {
        let mut x = Tensor::scalar(5.0);
        let mut opt = Adam::new(AdamConfig::with_lr(0.1), &[&x]);
        for _ in 0..500 {
            let g = Tensor::scalar(2.0 * x.item());
            opt.step(&mut [&mut x], &[g]).unwrap();
        }
        assert!(x.item().abs() < 0.05, "x = {}", x.item());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = Tensor::scalar(1.0);
        let mut opt = Adam::new(AdamConfig::default(), &[&p]);
        assert!(opt.step(&mut [&mut p], &[Tensor::zeros(&[2])]).is_err());
        assert_eq!(opt.steps(), 0);
    }
}
