use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment buffers for every trainable tensor, kept in f64 whatever the model precision.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub learning_rate: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, config: AdamConfig) -> Self {
        OptimizerState {
            config,
            learning_rate,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One bias-corrected Adam update over `(values, grads)` pairs. The
    /// pairing must be the same on every call. A non-finite gradient aborts
    /// before anything is modified.
    pub fn step<R: Real>(&mut self, tensors: &mut [(&mut [R], &[R])]) -> Result<()> {
        for (i, (_, g)) in tensors.iter().enumerate() {
            if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite gradient in tensor {i} at element {j}")));
            }
        }
        if self.m.is_empty() {
            self.m = tensors.iter().map(|(p, _)| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != tensors.len() || self.m.iter().zip(tensors.iter()).any(|(m, (p, _))| m.len() != p.len()) {
            return Err(Error::dim("optimizer state does not match the parameter layout"));
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let lr = self.learning_rate;
        for ((p, g), (m, v)) in tensors.iter_mut().zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.len() {
                let g = g[i].as_f64();
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let update = lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                p[i] = R::of(p[i].as_f64() - update);
            }
        }
        Ok(())
    }

    /// Applies one step to every trainable tensor of `model` using its
    /// accumulated gradients.
    pub fn step_model<R: Real>(&mut self, model: &mut Model<R>) -> Result<()> {
        let mut params = model.named_params_mut();
        let mut pairs: Vec<(&mut [R], &[R])> = params
            .iter_mut()
            .map(|(_, t)| {
                let (d, g) = t.data_and_grad_mut();
                (d, &*g)
            })
            .collect();
        self.step(&mut pairs)
    }
}

/// Scales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<R: Real>(model: &mut Model<R>, max_norm: f64) -> f64 {
    let mut params = model.named_params_mut();
    let sq: f64 = params
        .iter()
        .filter_map(|(_, t)| t.grad())
        .flat_map(|g| g.iter().map(|v| v.as_f64() * v.as_f64()))
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = R::of(max_norm / norm);
        for (_, t) in params.iter_mut() {
            if t.grad().is_some() {
                t.grad_mut().iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_step(state: &mut OptimizerState, theta: &mut f64, g: f64) {
        let mut p = [*theta];
        state.step(&mut [(&mut p[..], &[g][..])]).unwrap();
        *theta = p[0];
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = OptimizerState::new(1e-3, AdamConfig::default());
        let mut th = 0.0;
        scalar_step(&mut s, &mut th, 1.0);
        assert!((th + 1e-3).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut s = OptimizerState::new(1e-3, AdamConfig::default());
        let mut th = 0.7;
        for _ in 0..10 {
            scalar_step(&mut s, &mut th, 0.0);
        }
        assert_eq!(th, 0.7);
    }

    #[test]
    fn quadratic_descends_monotonically() {
        let mut s = OptimizerState::new(1e-3, AdamConfig::default());
        let mut th = 1.0f64;
        for _ in 0..10 {
            let before = th.abs();
            let g = 2.0 * th;
            scalar_step(&mut s, &mut th, g);
            assert!(th.abs() < before);
        }
    }

    #[test]
    fn non_finite_gradient_is_numeric_error() {
        let mut s = OptimizerState::new(1e-3, AdamConfig::default());
        let mut p = [1.0f64];
        let r = s.step(&mut [(&mut p[..], &[f64::NAN][..])]);
        assert!(matches!(r, Err(Error::Numeric(_))));
        assert_eq!(p[0], 1.0);
        assert_eq!(s.step, 0);
    }
}
