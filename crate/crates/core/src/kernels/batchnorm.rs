use super::Mode;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Per-channel affine parameters and running statistics. Channels are the last axis.
#[derive(Debug, Clone)]
pub struct BatchNormState<R: Real> {
    pub gamma: Tensor<R>,
    pub beta: Tensor<R>,
    pub running_mean: Tensor<R>,
    pub running_var: Tensor<R>,
    pub momentum: f64,
    pub epsilon: f64,
}

impl<R: Real> BatchNormState<R> {
    pub const DEFAULT_MOMENTUM: f64 = 0.99;
    pub const DEFAULT_EPSILON: f64 = 1e-3;

    pub fn new(channels: usize) -> Self {
        Self::with_hyper(channels, Self::DEFAULT_MOMENTUM, Self::DEFAULT_EPSILON)
    }

    pub fn with_hyper(channels: usize, momentum: f64, epsilon: f64) -> Self {
        assert!(momentum > 0.0 && momentum < 1.0, "momentum must be in (0, 1)");
        assert!(epsilon > 0.0, "epsilon must be positive");
        BatchNormState {
            gamma: Tensor::full(&[channels], R::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], R::one()),
            momentum,
            epsilon,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

#[derive(Debug)]
pub struct BnCache<R: Real> {
    xhat: Vec<R>,
    inv_std: Vec<R>,
    gamma: Vec<R>,
    mode: Mode,
    shape: Vec<usize>,
}

#[derive(Debug)]
pub struct BnGrads<R: Real> {
    pub dx: Tensor<R>,
    pub dgamma: Tensor<R>,
    pub dbeta: Tensor<R>,
}

/// Normalizes each channel (last axis) over all leading positions.
///
/// Train mode uses biased batch statistics and folds them into the running
/// estimates as `running ← momentum·running + (1 − momentum)·batch`.
pub fn batchnorm_forward<R: Real>(
    x: &Tensor<R>,
    state: &mut BatchNormState<R>,
    mode: Mode,
) -> Result<(Tensor<R>, BnCache<R>)> {
    let c = state.channels();
    if x.shape().last() != Some(&c) {
        return Err(Error::dim(format!(
            "batch-norm over {c} channels got input {:?}",
            x.shape()
        )));
    }
    let n = x.len() / c;
    let xd = x.data();

    let (mean, var): (Vec<f64>, Vec<f64>) = match mode {
        Mode::Train => {
            if n < 2 {
                return Err(Error::DegenerateBatch(format!(
                    "batch-norm needs at least 2 values per channel in train mode, got {n}"
                )));
            }
            let mut mean = vec![0.0f64; c];
            for row in xd.chunks_exact(c) {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v.as_f64();
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            let mut var = vec![0.0f64; c];
            for row in xd.chunks_exact(c) {
                for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    let d = v.as_f64() - m;
                    *s += d * d;
                }
            }
            var.iter_mut().for_each(|s| *s /= n as f64);

            let mom = state.momentum;
            for (rm, m) in state.running_mean.data_mut().iter_mut().zip(&mean) {
                *rm = R::of(mom * rm.as_f64() + (1.0 - mom) * m);
            }
            for (rv, v) in state.running_var.data_mut().iter_mut().zip(&var) {
                let updated = mom * rv.as_f64() + (1.0 - mom) * v;
                // Keep the running variance strictly positive even at f32.
                *rv = R::of(updated).max(R::min_positive_value());
            }
            (mean, var)
        }
        Mode::Infer => (
            state.running_mean.data().iter().map(|v| v.as_f64()).collect(),
            state.running_var.data().iter().map(|v| v.as_f64()).collect(),
        ),
    };

    let inv_std: Vec<R> = var
        .iter()
        .map(|v| R::of(1.0 / (v + state.epsilon).sqrt()))
        .collect();
    let mean: Vec<R> = mean.into_iter().map(R::of).collect();
    let gamma = state.gamma.data();
    let beta = state.beta.data();

    let mut xhat = Vec::with_capacity(xd.len());
    let mut out = Vec::with_capacity(xd.len());
    for row in xd.chunks_exact(c) {
        for ch in 0..c {
            let h = (row[ch] - mean[ch]) * inv_std[ch];
            xhat.push(h);
            out.push(gamma[ch] * h + beta[ch]);
        }
    }
    let cache = BnCache {
        xhat,
        inv_std,
        gamma: gamma.to_vec(),
        mode,
        shape: x.shape().to_vec(),
    };
    Ok((Tensor::from_vec(x.shape(), out)?, cache))
}

pub fn batchnorm_backward<R: Real>(cache: BnCache<R>, dy: &Tensor<R>) -> Result<BnGrads<R>> {
    if dy.shape() != cache.shape.as_slice() {
        return Err(Error::dim(format!(
            "batch-norm upstream gradient {:?} != input {:?}",
            dy.shape(),
            cache.shape
        )));
    }
    let c = cache.gamma.len();
    let n = dy.len() / c;
    let dyd = dy.data();

    let mut dgamma = vec![R::zero(); c];
    let mut dbeta = vec![R::zero(); c];
    for (row, hrow) in dyd.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
        for ch in 0..c {
            dgamma[ch] += row[ch] * hrow[ch];
            dbeta[ch] += row[ch];
        }
    }

    let mut dx = vec![R::zero(); dyd.len()];
    match cache.mode {
        Mode::Train => {
            // dx = γ·σ⁻¹/N · (N·dy − Σdy − x̂·Σ(dy·x̂)); Σdy = dβ and Σ(dy·x̂) = dγ.
            let nr = R::of(n as f64);
            for ((out, row), hrow) in dx
                .chunks_exact_mut(c)
                .zip(dyd.chunks_exact(c))
                .zip(cache.xhat.chunks_exact(c))
            {
                for ch in 0..c {
                    let scale = cache.gamma[ch] * cache.inv_std[ch] / nr;
                    out[ch] = scale * (nr * row[ch] - dbeta[ch] - hrow[ch] * dgamma[ch]);
                }
            }
        }
        Mode::Infer => {
            for (out, row) in dx.chunks_exact_mut(c).zip(dyd.chunks_exact(c)) {
                for ch in 0..c {
                    out[ch] = row[ch] * cache.gamma[ch] * cache.inv_std[ch];
                }
            }
        }
    }
    Ok(BnGrads {
        dx: Tensor::from_vec(&cache.shape, dx)?,
        dgamma: Tensor::from_vec(&[c], dgamma)?,
        dbeta: Tensor::from_vec(&[c], dbeta)?,
    })
}
