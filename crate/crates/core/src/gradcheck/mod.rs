//! Central finite-difference gradient checking at 64-bit precision.
//!
//! An analytic value `a` and numeric value `n` agree when
//! `|a − n| / max(|a|, |n|, floor) ≤ rtol`. The floor keeps gradients that are
//! zero up to round-off from being judged on relative error alone.

mod suite;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::Mode;
use crate::model::Model;
use crate::seed;
use crate::tensor::Tensor;

pub use suite::{check_kernel, gating_case, kernel_suite, tiny_model_check, tiny_spec, KernelResult, KERNELS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Perturbation half-width.
    pub step: f64,
    pub rtol: f64,
    pub floor: f64,
}

impl GradCheckConfig {
    pub fn with_rtol(rtol: f64) -> Self {
        GradCheckConfig { rtol, ..Default::default() }
    }
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            rtol: 1e-4,
            floor: 1e-4,
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub elements: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub rtol: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> Vec<&TensorCheck> {
        self.tensors.iter().filter(|t| !t.passed).collect()
    }
}

/// Compares `analytic` with central differences of `f` around `x`.
pub fn check_vector(
    name: &str,
    x: &[f64],
    analytic: &[f64],
    cfg: &GradCheckConfig,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<TensorCheck> {
    if x.len() != analytic.len() {
        return Err(Error::dim(format!(
            "{name}: {} inputs but {} analytic gradients",
            x.len(),
            analytic.len()
        )));
    }
    let mut probe = x.to_vec();
    let mut worst = TensorCheck {
        name: name.to_string(),
        elements: x.len(),
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        passed: true,
    };
    for i in 0..x.len() {
        probe[i] = x[i] + cfg.step;
        let up = f(&probe)?;
        probe[i] = x[i] - cfg.step;
        let down = f(&probe)?;
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * cfg.step);
        let err = relative_error(analytic[i], numeric, cfg.floor);
        if !(err <= worst.max_rel_error) {
            worst.max_rel_error = err;
            worst.worst_index = i;
            worst.analytic = analytic[i];
            worst.numeric = numeric;
        }
    }
    worst.passed = worst.max_rel_error <= cfg.rtol;
    Ok(worst)
}

/// Fixed random projection weights turning a tensor output into a scalar loss.
pub fn projection(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = seed::rng(seed, "gradcheck-projection", &[]);
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Checks every trainable parameter (and the input) of a 64-bit model on the
/// scalar loss `Σ probs ⊙ w` for a fixed random `w`. Train-mode batch
/// statistics are used; dropout masks must be frozen first.
pub fn finite_difference_check(
    model: &mut Model<f64>,
    x: &Tensor<f64>,
    cfg: &GradCheckConfig,
    seed: u64,
) -> Result<GradCheckReport> {
    let unfrozen = model.stochastic_layers();
    if !unfrozen.is_empty() {
        return Err(Error::Usage(format!(
            "dropout masks must be frozen before a gradient check (stochastic layers: {})",
            unfrozen.join(", ")
        )));
    }
    let probs = model.forward(x, Mode::Train)?;
    let w = projection(probs.shape(), seed);
    model.zero_grad();
    let dx = model.backward(&w)?;

    let analytic: Vec<(String, Vec<f64>, Vec<f64>)> = model
        .named_params()
        .into_iter()
        .map(|(n, t)| {
            let g = t.grad().map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec);
            (n, t.data().to_vec(), g)
        })
        .collect();

    let mut tensors = Vec::new();
    for (idx, (name, values, grad)) in analytic.iter().enumerate() {
        let check = check_vector(name, values, grad, cfg, |probe| {
            model.named_params_mut()[idx].1.data_mut().copy_from_slice(probe);
            let p = model.forward(x, Mode::Train)?;
            Ok(dot(&p, &w))
        })?;
        model.named_params_mut()[idx].1.data_mut().copy_from_slice(values);
        tensors.push(check);
    }

    let shape = x.shape().to_vec();
    let input_check = check_vector("input", x.data(), dx.data(), cfg, |probe| {
        let xi = Tensor::from_vec(&shape, probe.to_vec())?;
        let p = model.forward(&xi, Mode::Train)?;
        Ok(dot(&p, &w))
    })?;
    tensors.push(input_check);

    Ok(GradCheckReport { rtol: cfg.rtol, tensors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let x = [1.0, -2.0, 0.5];
        let analytic: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let c = check_vector("q", &x, &analytic, &GradCheckConfig::default(), |p| {
            Ok(p.iter().map(|v| v * v).sum())
        })
        .unwrap();
        assert!(c.passed, "{c:?}");
        let wrong: Vec<f64> = analytic.iter().map(|g| g * 1.01).collect();
        let c = check_vector("q", &x, &wrong, &GradCheckConfig::default(), |p| Ok(p.iter().map(|v| v * v).sum()))
            .unwrap();
        assert!(!c.passed);
    }

    #[test]
    fn floor_governs_tiny_values() {
        assert!((relative_error(1e-12, 0.0, 1e-4) - 1e-8).abs() < 1e-20);
        assert_eq!(relative_error(2.0, 1.0, 1e-4), 0.5);
    }
}
