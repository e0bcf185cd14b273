use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

const SIGMOID_CLAMP: f64 = 40.0;

/// Logistic function with the input clamped to ±40 and the output kept
/// strictly below one, so the result always lies in the open unit interval.
pub fn sigmoid_scalar<R: Real>(v: R) -> R {
    let lim = R::of(SIGMOID_CLAMP);
    let z = v.max(-lim).min(lim);
    let s = R::one() / (R::one() + (-z).exp());
    s.min(R::one() - R::epsilon())
}

impl Activation {
    pub fn apply<R: Real>(self, v: R) -> R {
        match self {
            Activation::Relu => v.max(R::zero()),
            Activation::Sigmoid => sigmoid_scalar(v),
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative<R: Real>(self, x: R, y: R) -> R {
        match self {
            Activation::Relu => {
                if x > R::zero() {
                    R::one()
                } else {
                    R::zero()
                }
            }
            Activation::Sigmoid => y * (R::one() - y),
            Activation::Tanh => R::one() - y * y,
        }
    }
}

#[derive(Debug)]
pub struct ActCache<R: Real> {
    kind: Activation,
    x: Vec<R>,
    y: Vec<R>,
    shape: Vec<usize>,
}

pub fn activation_forward<R: Real>(x: &Tensor<R>, kind: Activation) -> (Tensor<R>, ActCache<R>) {
    let y = x.map(|v| kind.apply(v));
    let cache = ActCache {
        kind,
        x: x.data().to_vec(),
        y: y.data().to_vec(),
        shape: x.shape().to_vec(),
    };
    (y, cache)
}

pub fn activation_backward<R: Real>(cache: ActCache<R>, dy: &Tensor<R>) -> Result<Tensor<R>> {
    if dy.shape() != cache.shape.as_slice() {
        return Err(Error::dim(format!(
            "activation upstream gradient {:?} != input {:?}",
            dy.shape(),
            cache.shape
        )));
    }
    let data = dy
        .data()
        .iter()
        .zip(cache.x.iter().zip(&cache.y))
        .map(|(&g, (&x, &y))| g * cache.kind.derivative(x, y))
        .collect();
    Tensor::from_vec(&cache.shape, data)
}
