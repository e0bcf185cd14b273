use rand::Rng;

use super::Mode;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Per-(batch item, channel) multiplier: 0 for dropped channels, `1/(1−rate)` for kept.
#[derive(Debug, Clone)]
pub struct DropoutCache<R: Real> {
    mask: Option<Vec<R>>,
    shape: Vec<usize>,
}

impl<R: Real> DropoutCache<R> {
    pub fn mask(&self) -> Option<&[R]> {
        self.mask.as_deref()
    }
}

fn dims<R: Real>(x: &Tensor<R>) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [b, c] => Ok((b, 1, c)),
        [b, t, c] => Ok((b, t, c)),
        _ => Err(Error::dim(format!(
            "dropout expects [B, C] or [B, T, C], got {:?}",
            x.shape()
        ))),
    }
}

/// Channel-wise dropout: a dropped channel is zero at every time step of that
/// batch item. On rank-2 `[B, C]` input this is ordinary element dropout.
pub fn spatial_dropout<R: Real, G: Rng + ?Sized>(
    x: &Tensor<R>,
    rate: f64,
    mode: Mode,
    rng: &mut G,
) -> Result<(Tensor<R>, DropoutCache<R>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!("dropout rate {rate} must lie in [0, 1)")));
    }
    let (b, _, c) = dims(x)?;
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((
            x.clone(),
            DropoutCache {
                mask: None,
                shape: x.shape().to_vec(),
            },
        ));
    }
    let keep = R::of(1.0 / (1.0 - rate));
    let mask: Vec<R> = (0..b * c)
        .map(|_| if rng.random::<f64>() < rate { R::zero() } else { keep })
        .collect();
    spatial_dropout_with_mask(x, mask)
}

/// Applies a previously drawn mask (used to freeze masks for gradient checks).
pub fn spatial_dropout_with_mask<R: Real>(
    x: &Tensor<R>,
    mask: Vec<R>,
) -> Result<(Tensor<R>, DropoutCache<R>)> {
    let (b, t, c) = dims(x)?;
    if mask.len() != b * c {
        return Err(Error::dim(format!(
            "dropout mask has {} entries, expected {}",
            mask.len(),
            b * c
        )));
    }
    let mut out = x.data().to_vec();
    apply(&mut out, &mask, b, t, c);
    Ok((
        Tensor::from_vec(x.shape(), out)?,
        DropoutCache {
            mask: Some(mask),
            shape: x.shape().to_vec(),
        },
    ))
}

fn apply<R: Real>(values: &mut [R], mask: &[R], b: usize, t: usize, c: usize) {
    for bi in 0..b {
        let m = &mask[bi * c..(bi + 1) * c];
        for ti in 0..t {
            let row = &mut values[(bi * t + ti) * c..(bi * t + ti + 1) * c];
            for (v, s) in row.iter_mut().zip(m) {
                *v *= *s;
            }
        }
    }
}

pub fn dropout_backward<R: Real>(cache: DropoutCache<R>, dy: &Tensor<R>) -> Result<Tensor<R>> {
    if dy.shape() != cache.shape.as_slice() {
        return Err(Error::dim(format!(
            "dropout upstream gradient {:?} != input {:?}",
            dy.shape(),
            cache.shape
        )));
    }
    let mut dx = dy.clone();
    if let Some(mask) = &cache.mask {
        let (b, t, c) = dims(dy)?;
        apply(dx.data_mut(), mask, b, t, c);
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_and_infer_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::<f64>::from_fn(&[2, 5, 3], |i| i as f64);
        let (y, _) = spatial_dropout(&x, 0.0, Mode::Train, &mut rng).unwrap();
        assert_eq!(y, x);
        let (y, _) = spatial_dropout(&x, 0.7, Mode::Infer, &mut rng).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn rate_of_one_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::<f64>::zeros(&[1, 2, 2]);
        assert!(matches!(
            spatial_dropout(&x, 1.0, Mode::Train, &mut rng),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn monte_carlo_drop_fraction_whole_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (b, t, c) = (100usize, 4usize, 1000usize);
        let x = Tensor::<f32>::full(&[b, t, c], 1.0);
        let (y, _) = spatial_dropout(&x, 0.1, Mode::Train, &mut rng).unwrap();
        let mut dropped = 0usize;
        for bi in 0..b {
            for ch in 0..c {
                let vals: Vec<f32> = (0..t).map(|ti| y.data()[(bi * t + ti) * c + ch]).collect();
                if vals[0] == 0.0 {
                    dropped += 1;
                    assert!(vals.iter().all(|&v| v == 0.0));
                } else {
                    assert!(vals.iter().all(|&v| (v - 1.0 / 0.9).abs() < 1e-6));
                }
            }
        }
        let frac = dropped as f64 / (b * c) as f64;
        assert!((frac - 0.1).abs() < 0.01, "dropped fraction {frac}");
    }

    #[test]
    fn backward_applies_the_same_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::<f64>::full(&[3, 2, 4], 1.0);
        let (y, cache) = spatial_dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let dx = dropout_backward(cache, &Tensor::full(&[3, 2, 4], 1.0)).unwrap();
        assert_eq!(dx, y);
    }
}
