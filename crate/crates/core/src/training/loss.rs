use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

pub const PROB_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy against smoothed targets
/// `y' = y(1 − ε) + ε/2`, with probabilities clamped to `[1e-7, 1 − 1e-7]`.
/// Returns the loss and its gradient with respect to `probs`.
pub fn bce_smoothed_loss<R: Real>(probs: &Tensor<R>, targets: &Tensor<R>, smoothing: f64) -> Result<(f64, Tensor<R>)> {
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::Config(format!("label smoothing {smoothing} outside [0, 1)")));
    }
    if probs.shape() != targets.shape() {
        return Err(Error::dim(format!("probs {:?} vs targets {:?}", probs.shape(), targets.shape())));
    }
    let m = probs.len();
    if m == 0 {
        return Err(Error::dim("empty batch"));
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(m);
    for (&p, &y) in probs.data().iter().zip(targets.data()) {
        let y = y.as_f64() * (1.0 - smoothing) + smoothing / 2.0;
        let raw = p.as_f64();
        let p = raw.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        // Zero gradient where the clamp is active.
        let g = if raw == p { (-(y / p) + (1.0 - y) / (1.0 - p)) / m as f64 } else { 0.0 };
        grad.push(R::of(g));
    }
    Ok((loss / m as f64, Tensor::from_vec(probs.shape(), grad)?))
}
