//! Feature-wise gating over the pooled representation: two dense layers
//! (ReLU then sigmoid) produce a gate in (0,1)^D that rescales each feature.

use rand::Rng;

use super::init::he_normal;
use crate::error::{Error, Result};
use crate::kernels::{
    activation_backward, activation_forward, dense_backward, dense_forward, ActCache, Activation,
    DenseCache,
};
use crate::real::Real;
use crate::tensor::Tensor;

pub const DEFAULT_REDUCTION: usize = 4;
pub const MIN_GATING_HIDDEN: usize = 4;

/// Bottleneck width for a gate over `dim` features: `max(⌈dim / r⌉, 4)`.
pub fn gating_hidden(dim: usize, reduction: usize) -> usize {
    dim.div_ceil(reduction.max(1)).max(MIN_GATING_HIDDEN)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatingModule<R: Real> {
    pub fc1_weights: Tensor<R>,
    pub fc1_bias: Tensor<R>,
    pub fc2_weights: Tensor<R>,
    pub fc2_bias: Tensor<R>,
    pub reduction: usize,
}

impl<R: Real> GatingModule<R> {
    pub fn zeros(dim: usize, reduction: usize) -> Self {
        let hidden = gating_hidden(dim, reduction);
        GatingModule {
            fc1_weights: Tensor::zeros(&[dim, hidden]),
            fc1_bias: Tensor::zeros(&[hidden]),
            fc2_weights: Tensor::zeros(&[hidden, dim]),
            fc2_bias: Tensor::zeros(&[dim]),
            reduction,
        }
    }

    pub fn init<G: Rng + ?Sized>(dim: usize, reduction: usize, rng: &mut G) -> Self {
        let mut m = Self::zeros(dim, reduction);
        he_normal(&mut m.fc1_weights, dim, rng);
        let hidden = m.hidden();
        he_normal(&mut m.fc2_weights, hidden, rng);
        m
    }

    pub fn dim(&self) -> usize {
        self.fc2_bias.len()
    }

    pub fn hidden(&self) -> usize {
        self.fc1_bias.len()
    }

    pub fn param_count(&self) -> usize {
        self.fc1_weights.len() + self.fc1_bias.len() + self.fc2_weights.len() + self.fc2_bias.len()
    }
}

#[derive(Debug)]
pub struct GatingCache<R: Real> {
    pooled: Vec<R>,
    gate: Vec<R>,
    shape: Vec<usize>,
    fc1: DenseCache<R>,
    relu: ActCache<R>,
    fc2: DenseCache<R>,
    sigmoid: ActCache<R>,
}

#[derive(Debug)]
pub struct GatingGrads<R: Real> {
    pub fc1_weights: Tensor<R>,
    pub fc1_bias: Tensor<R>,
    pub fc2_weights: Tensor<R>,
    pub fc2_bias: Tensor<R>,
}

/// `out = pooled ⊙ σ(fc2(relu(fc1(pooled))))`; shape is unchanged.
pub fn apply_gating<R: Real>(
    pooled: &Tensor<R>,
    gating: &GatingModule<R>,
) -> Result<(Tensor<R>, GatingCache<R>)> {
    if pooled.rank() != 2 || pooled.dim(1) != gating.dim() {
        return Err(Error::dim(format!(
            "gating over {} features got input {:?}",
            gating.dim(),
            pooled.shape()
        )));
    }
    let (a1, fc1) = dense_forward(pooled, &gating.fc1_weights, &gating.fc1_bias)?;
    let (h1, relu) = activation_forward(&a1, Activation::Relu);
    let (a2, fc2) = dense_forward(&h1, &gating.fc2_weights, &gating.fc2_bias)?;
    let (gate, sigmoid) = activation_forward(&a2, Activation::Sigmoid);
    let out: Vec<R> = pooled
        .data()
        .iter()
        .zip(gate.data())
        .map(|(&x, &g)| x * g)
        .collect();
    let cache = GatingCache {
        pooled: pooled.data().to_vec(),
        gate: gate.data().to_vec(),
        shape: pooled.shape().to_vec(),
        fc1,
        relu,
        fc2,
        sigmoid,
    };
    Ok((Tensor::from_vec(pooled.shape(), out)?, cache))
}

/// Ablation-aware wrapper: without a module the pooled features pass through unchanged.
pub fn apply_optional_gating<R: Real>(
    pooled: &Tensor<R>,
    gating: Option<&GatingModule<R>>,
) -> Result<Tensor<R>> {
    match gating {
        Some(g) => Ok(apply_gating(pooled, g)?.0),
        None => Ok(pooled.clone()),
    }
}

pub fn gating_backward<R: Real>(cache: GatingCache<R>, dy: &Tensor<R>) -> Result<(Tensor<R>, GatingGrads<R>)> {
    if dy.shape() != cache.shape.as_slice() {
        return Err(Error::dim(format!(
            "gating upstream gradient {:?} != {:?}",
            dy.shape(),
            cache.shape
        )));
    }
    let d_gate: Vec<R> = dy.data().iter().zip(&cache.pooled).map(|(&g, &x)| g * x).collect();
    let d_gate = Tensor::from_vec(&cache.shape, d_gate)?;
    let da2 = activation_backward(cache.sigmoid, &d_gate)?;
    let g2 = dense_backward(cache.fc2, &da2)?;
    let da1 = activation_backward(cache.relu, &g2.dx)?;
    let g1 = dense_backward(cache.fc1, &da1)?;
    let mut dx = g1.dx;
    for ((d, &g), &up) in dx.data_mut().iter_mut().zip(&cache.gate).zip(dy.data()) {
        *d += up * g;
    }
    Ok((
        dx,
        GatingGrads {
            fc1_weights: g1.dw,
            fc1_bias: g1.db,
            fc2_weights: g2.dw,
            fc2_bias: g2.db,
        },
    ))
}
