use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Mode;

/// Train-time perturbation of standardised signals: with probability
/// `probability` a record gets additive Gaussian noise (std drawn uniformly
/// from the noise range) and one amplitude factor shared by all leads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub probability: f64,
    pub noise_std_min: f64,
    pub noise_std_max: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            probability: 0.5,
            noise_std_min: 0.005,
            noise_std_max: 0.05,
            scale_min: 0.9,
            scale_max: 1.1,
        }
    }
}

impl AugmentConfig {
    /// No perturbation at all, even in train mode.
    pub fn disabled() -> Self {
        AugmentConfig {
            probability: 0.0,
            noise_std_min: 0.0,
            noise_std_max: 0.0,
            scale_min: 1.0,
            scale_max: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("augmentation: {m}")));
        if !(0.0..=1.0).contains(&self.probability) {
            return bad(format!("probability {} outside [0, 1]", self.probability));
        }
        if !(self.noise_std_min >= 0.0) || !(self.noise_std_max >= self.noise_std_min) || !self.noise_std_max.is_finite() {
            return bad(format!("noise std range [{}, {}] invalid", self.noise_std_min, self.noise_std_max));
        }
        if !(self.scale_min > 0.0) || !(self.scale_max >= self.scale_min) || !self.scale_max.is_finite() {
            return bad(format!("scale range [{}, {}] invalid", self.scale_min, self.scale_max));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Perturbs `signal` in place. Infer mode leaves it untouched.
pub fn augment(signal: &mut [f32], cfg: &AugmentConfig, rng: &mut ChaCha8Rng, mode: Mode) -> Result<()> {
    cfg.validate()?;
    if mode == Mode::Infer || cfg.probability == 0.0 {
        return Ok(());
    }
    if !rng.random_bool(cfg.probability) {
        return Ok(());
    }
    let sigma = uniform(rng, cfg.noise_std_min, cfg.noise_std_max);
    let scale = uniform(rng, cfg.scale_min, cfg.scale_max);
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::Config(format!("augmentation: {e}")))?;
        for v in signal.iter_mut() {
            *v = ((*v as f64 + noise.sample(rng)) * scale) as f32;
        }
    } else if scale != 1.0 {
        for v in signal.iter_mut() {
            *v = (*v as f64 * scale) as f32;
        }
    }
    Ok(())
}

/// RNG for one record in one epoch. Depends only on (seed, epoch, ecg_id) so
/// the loading order never changes what a record receives.
pub fn record_rng(seed: u64, epoch: u64, ecg_id: u32) -> ChaCha8Rng {
    crate::seed::rng(seed, "augment", &[epoch, ecg_id as u64])
}
