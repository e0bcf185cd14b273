//! Stateful layer wrappers around the kernels. Each layer owns its parameters
//! and at most one pending cache; `backward` consumes that cache and adds the
//! parameter gradients into the parameters' gradient buffers.

use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gating::{apply_gating, gating_backward, GatingCache, GatingModule};
use crate::error::{Error, Result};
use crate::kernels::{
    activation_backward, activation_forward, batchnorm_backward, batchnorm_forward,
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, dropout_backward,
    global_average_pool, global_average_pool_backward, maxpool1d, maxpool1d_backward,
    spatial_dropout, spatial_dropout_with_mask, ActCache, Activation, BatchNormState, BnCache,
    ConvCache, DenseCache, DropoutCache, GapCache, Mode, PoolCache,
};
use crate::real::Real;
use crate::recurrent::{
    bidirectional, bidirectional_backward, bptt_backward, run_sequence, BiCache, CellKind,
    RecurrentCache, RecurrentParams,
};
use crate::tensor::Tensor;

pub struct ForwardCtx<'a> {
    pub mode: Mode,
    pub rng: &'a mut ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv1d,
    BatchNorm,
    Relu,
    Sigmoid,
    Tanh,
    MaxPool,
    SpatialDropout,
    Dropout,
    Lstm,
    Gru,
    BiLstm,
    GlobalAvgPool,
    Gating,
    Dense,
}

impl LayerKind {
    pub fn is_recurrent(self) -> bool {
        matches!(self, LayerKind::Lstm | LayerKind::Gru | LayerKind::BiLstm)
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LayerKind::Conv1d => "conv1d",
            LayerKind::BatchNorm => "batch_norm",
            LayerKind::Relu => "relu",
            LayerKind::Sigmoid => "sigmoid",
            LayerKind::Tanh => "tanh",
            LayerKind::MaxPool => "max_pool",
            LayerKind::SpatialDropout => "spatial_dropout",
            LayerKind::Dropout => "dropout",
            LayerKind::Lstm => "lstm",
            LayerKind::Gru => "gru",
            LayerKind::BiLstm => "bilstm",
            LayerKind::GlobalAvgPool => "global_avg_pool",
            LayerKind::Gating => "gating",
            LayerKind::Dense => "dense",
        };
        f.write_str(s)
    }
}

pub trait Layer<R: Real>: Send + Sync {
    fn name(&self) -> &str;

    fn kind(&self) -> LayerKind;

    fn forward(&mut self, x: &Tensor<R>, ctx: &mut ForwardCtx<'_>) -> Result<Tensor<R>>;

    /// Inference-mode forward that keeps no cache and mutates nothing.
    fn infer(&self, x: &Tensor<R>) -> Result<Tensor<R>>;

    /// Returns the input gradient and accumulates parameter gradients.
    fn backward(&mut self, dy: &Tensor<R>) -> Result<Tensor<R>>;

    fn params(&self) -> Vec<(&'static str, &Tensor<R>)> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor<R>)> {
        Vec::new()
    }

    /// Non-trainable persistent state (batch-norm running statistics).
    fn buffers(&self) -> Vec<(&'static str, &Tensor<R>)> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<(&'static str, &mut Tensor<R>)> {
        Vec::new()
    }

    /// True when a train-mode forward draws fresh randomness.
    fn stochastic(&self) -> bool {
        false
    }

    /// Freezes (or releases) random masks so repeated forwards are identical.
    fn set_frozen(&mut self, _frozen: bool) {}

    /// Test hook that corrupts this layer's analytic weight gradient by
    /// `scale`. Returns false for layers that do not support it.
    fn plant_gradient_fault(&mut self, _scale: f64) -> bool {
        false
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }
}

fn take<C>(cache: &mut Option<C>, name: &str) -> Result<C> {
    cache.take().ok_or_else(|| {
        Error::Usage(format!(
            "{name}: backward called without a pending forward (cache missing or already consumed)"
        ))
    })
}

pub struct Conv1dLayer<R: Real> {
    name: String,
    pub weights: Tensor<R>,
    pub bias: Tensor<R>,
    cache: Option<ConvCache<R>>,
}

impl<R: Real> Conv1dLayer<R> {
    pub fn new(name: impl Into<String>, weights: Tensor<R>, bias: Tensor<R>) -> Self {
        Conv1dLayer {
            name: name.into(),
            weights,
            bias,
            cache: None,
        }
    }
}

impl<R: Real> Layer<R> for Conv1dLayer<R> {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> LayerKind {
        LayerKind::Conv1d
    }
    fn forward(&mut self, x: &Tensor<R>, _ctx: &mut ForwardCtx<'_>) -> Result<Tensor<R>> {
        let (y, cache) = conv1d_forward(x, &self.weights, &self.bias)?;
        self.cache = Some(cache);
        Ok(y)
    }
    fn infer(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        Ok(conv1d_forward(x, &self.weights, &self.bias)?.0)
    }
    fn backward(&mut self, dy: &Tensor<R>) -> Result<Tensor<R>> {
        let g = conv1d_backward(take(&mut self.cache, &self.name)?, dy)?;
        self.weights.accumulate_grad(g.dw.data());
        self.bias.accumulate_grad(g.db.data());
        Ok(g.dx)
    }
    fn params(&self) -> Vec<(&'static str, &Tensor<R>)> {
        vec![("weights", &self.weights), ("bias", &self.bias)]
    }
    fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor<R>)> {
        vec![("weights", &mut self.weights), ("bias", &mut self.bias)]
    }
}

pub struct BatchNormLayer<R: Real> {
    name: String,
    pub state: BatchNormState<R>,
    cache: Option<BnCache<R>>,
}

impl<R: Real> BatchNormLayer<R> {
    pub fn new(name: impl Into<String>, channels: usize) -> Self {
        BatchNormLayer {
            name: name.into(),
            state: BatchNormState::new(channels),
            cache: None,
        }
    }
}

impl<R: Real> Layer<R> for BatchNormLayer<R> {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> LayerKind {
        LayerKind::BatchNorm
    }
    fn forward(&mut self, x: &Tensor<R>, ctx: &mut ForwardCtx<'_>) -> Result<Tensor<R>> {
        let (y, cache) = batchnorm_forward(x, &mut self.state, ctx.mode)?;
        self.cache = Some(cache);
        Ok(y)
    }
    fn infer(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        let mut state = self.state.clone();
        Ok(batchnorm_forward(x, &mut state, Mode::Infer)?.0)
    }
    fn backward(&mut self, dy: &Tensor<R>) -> Result<Tensor<R>> {
        let g = batchnorm_backward(take(&mut self.cache, &self.name)?, dy)?;
        self.state.gamma.accumulate_grad(g.dgamma.data());
        self.state.beta.accumulate_grad(g.dbeta.data());
        Ok(g.dx)
    }
    fn params(&self) -> Vec<(&'static str, &Tensor<R>)> {
        vec![("gamma", &self.state.gamma), ("beta", &self.state.beta)]
    }
    fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor<R>)> {
        vec![("gamma", &mut self.state.gamma), ("beta", &mut self.state.beta)]
    }
    fn buffers(&self) -> Vec<(&'static str, &Tensor<R>)> {
        vec![
            ("running_mean", &self.state.running_mean),
            ("running_var", &self.state.running_var),
        ]
    }
    fn buffers_mut(&mut self) -> Vec<(&'static str, &mut Tensor<R>)> {
        vec![
            ("running_mean", &mut self.state.running_mean),
            ("running_var", &mut self.state.running_var),
        ]
    }
}

pub struct ActivationLayer<R: Real> {
    name: String,
    act: Activation,
    cache: Option<ActCache<R>>,
}

impl<R: Real> ActivationLayer<R> {
    pub fn new(name: impl Into<String>, act: Activation) -> Self {
        ActivationLayer {
            name: name.into(),
            act,
            cache: None,
        }
    }
}

impl<R: Real> Layer<R> for ActivationLayer<R> {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> LayerKind {
        match self.act {
            Activation::Relu => LayerKind::Relu,
            Activation::Sigmoid => LayerKind::Sigmoid,
            Activation::Tanh => LayerKind::Tanh,
        }
    }
    fn forward(&mut self, x: &Tensor<R>, _ctx: &mut ForwardCtx<'_>) -> Result<Tensor<R>> {
        let (y, cache) = activation_forward(x, self.act);
        self.cache = Some(cache);
        Ok(y)
    }
    fn infer(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        Ok(activation_forward(x, self.act).0)
    }
    fn backward(&mut self, dy: &Tensor<R>) -> Result<Tensor<R>> {
        activation_backward(take(&mut self.cache, &self.name)?, dy)
    }
}

pub struct MaxPoolLayer {
    name: String,
    pool: usize,
    cache: Option<PoolCache>,
}

impl MaxPoolLayer {
    pub fn new(name: impl Into<String>, pool: usize) -> Self {
        MaxPoolLayer {
            name: name.into(),
            pool,
            cache: None,
        }
    }
}

impl<R: Real> Layer<R> for MaxPoolLayer {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> LayerKind {
        LayerKind::MaxPool
    }
    fn forward(&mut self, x: &Tensor<R>, _ctx: &mut ForwardCtx<'_>) -> Result<Tensor<R>> {
        let (y, cache) = maxpool1d(x, self.pool)?;
        self.cache = Some(cache);
        Ok(y)
    }
    fn infer(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        Ok(maxpool1d(x, self.pool)?.0)
    }
    fn backward(&mut self, dy: &Tensor<R>) -> Result<Tensor<R>> {
        maxpool1d_backward(take(&mut self.cache, &self.name)?, dy)
    }
}

/// Channel dropout on `[B, T, C]` (spatial) or element dropout on `[B, D]`.
pub struct DropoutLayer<R: Real> {
    name: String,
    rate: f64,
    spatial: bool,
    frozen: bool,
    frozen_mask: Option<Vec<R>>,
    cache: Option<DropoutCache<R>>,
}

impl<R: Real> DropoutLayer<R> {
    pub fn new(name: impl Into<String>, rate: f64, spatial: bool) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Parameter(format!("dropout rate {rate} must lie in [0, 1)")));
        }
        Ok(DropoutLayer {
            name: name.into(),
            rate,
            spatial,
            frozen: false,
            frozen_mask: None,
            cache: None,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl<R: Real> Layer<R> for DropoutLayer<R> {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> LayerKind {
        if self.spatial {
            LayerKind::SpatialDropout
        } else {
            LayerKind::Dropout
        }
    }
    fn forward(&mut self, x: &Tensor<R>, ctx: &mut ForwardCtx<'_>) -> Result<Tensor<R>> {
        if self.frozen && ctx.mode == Mode::Train && self.rate > 0.0 {
            if let Some(mask) = &self.frozen_mask {
                let (y, cache) = spatial_dropout_with_mask(x, mask.clone())?;
                self.cache = Some(cache);
                return Ok(y);
            }
        }
        let (y, cache) = spatial_dropout(x, self.rate, ctx.mode, ctx.rng)?;
        if self.frozen {
            self.frozen_mask = cache.mask().map(<[R]>::to_vec);
        }
        self.cache = Some(cache);
        Ok(y)
    }
    fn infer(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        Ok(x.clone())
    }
    fn backward(&mut self, dy: &Tensor<R>) -> Result<Tensor<R>> {
        dropout_backward(take(&mut self.cache, &self.name)?, dy)
    }
    fn stochastic(&self) -> bool {
        self.rate > 0.0 && !self.frozen
    }
    fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
        if !frozen {
            self.frozen_mask = None;
        }
    }
}

pub struct RecurrentLayer<R: Real> {
    name: String,
    pub params: RecurrentParams<R>,
    cache: Option<RecurrentCache<R>>,
}

impl<R: Real> RecurrentLayer<R> {
    pub fn new(name: impl Into<String>, params: RecurrentParams<R>) -> Self {
        RecurrentLayer {
            name: name.into(),
            params,
            cache: None,
        }
    }
}

impl<R: Real> Layer<R> for RecurrentLayer<R> {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> LayerKind {
        match self.params.kind {
            CellKind::Lstm => LayerKind::Lstm,
            CellKind::Gru => LayerKind::Gru,
        }
    }
    fn forward(&mut self, x: &Tensor<R>, _ctx: &mut ForwardCtx<'_>) -> Result<Tensor<R>> {
        let (y, cache) = run_sequence(x, &self.params)?;
        self.cache = Some(cache);
        Ok(y)
    }
    fn infer(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        Ok(run_sequence(x, &self.params)?.0)
    }
    fn backward(&mut self, dy: &Tensor<R>) -> Result<Tensor<R>> {
        let (dx, g) = bptt_backward(take(&mut self.cache, &self.name)?, dy)?;
        self.params.input_weights.accumulate_grad(g.d_input_weights.data());
        self.params.recurrent_weights.accumulate_grad(g.d_recurrent_weights.data());
        self.params.bias.accumulate_grad(g.d_bias.data());
        Ok(dx)
    }
    fn params(&self) -> Vec<(&'static str, &Tensor<R>)> {
        vec![
            ("input_weights", &self.params.input_weights),
            ("recurrent_weights", &self.params.recurrent_weights),
            ("bias", &self.params.bias),
        ]
    }
    fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor<R>)> {
        vec![
            ("input_weights", &mut self.params.input_weights),
            ("recurrent_weights", &mut self.params.recurrent_weights),
            ("bias", &mut self.params.bias),
        ]
    }
}

pub struct BiLstmLayer<R: Real> {
    name: String,
    pub forward_params: RecurrentParams<R>,
    pub backward_params: RecurrentParams<R>,
    cache: Option<BiCache<R>>,
}

impl<R: Real> BiLstmLayer<R> {
    pub fn new(name: impl Into<String>, forward_params: RecurrentParams<R>, backward_params: RecurrentParams<R>) -> Self {
        BiLstmLayer {
            name: name.into(),
            forward_params,
            backward_params,
            cache: None,
        }
    }
}

impl<R: Real> Layer<R> for BiLstmLayer<R> {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> LayerKind {
        LayerKind::BiLstm
    }
    fn forward(&mut self, x: &Tensor<R>, _ctx: &mut ForwardCtx<'_>) -> Result<Tensor<R>> {
        let (y, cache) = bidirectional(x, &self.forward_params, &self.backward_params)?;
        self.cache = Some(cache);
        Ok(y)
    }
    fn infer(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        Ok(bidirectional(x, &self.forward_params, &self.backward_params)?.0)
    }
    fn backward(&mut self, dy: &Tensor<R>) -> Result<Tensor<R>> {
        let (dx, g) = bidirectional_backward(take(&mut self.cache, &self.name)?, dy)?;
        self.forward_params.input_weights.accumulate_grad(g.forward.d_input_weights.data());
        self.forward_params.recurrent_weights.accumulate_grad(g.forward.d_recurrent_weights.data());
        self.forward_params.bias.accumulate_grad(g.forward.d_bias.data());
        self.backward_params.input_weights.accumulate_grad(g.backward.d_input_weights.data());
        self.backward_params.recurrent_weights.accumulate_grad(g.backward.d_recurrent_weights.data());
        self.backward_params.bias.accumulate_grad(g.backward.d_bias.data());
        Ok(dx)
    }
    fn params(&self) -> Vec<(&'static str, &Tensor<R>)> {
        vec![
            ("forward.input_weights", &self.forward_params.input_weights),
            ("forward.recurrent_weights", &self.forward_params.recurrent_weights),
            ("forward.bias", &self.forward_params.bias),
            ("backward.input_weights", &self.backward_params.input_weights),
            ("backward.recurrent_weights", &self.backward_params.recurrent_weights),
            ("backward.bias", &self.backward_params.bias),
        ]
    }
    fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor<R>)> {
        vec![
            ("forward.input_weights", &mut self.forward_params.input_weights),
            ("forward.recurrent_weights", &mut self.forward_params.recurrent_weights),
            ("forward.bias", &mut self.forward_params.bias),
            ("backward.input_weights", &mut self.backward_params.input_weights),
            ("backward.recurrent_weights", &mut self.backward_params.recurrent_weights),
            ("backward.bias", &mut self.backward_params.bias),
        ]
    }
}

pub struct GapLayer {
    name: String,
    cache: Option<GapCache>,
}

impl GapLayer {
    pub fn new(name: impl Into<String>) -> Self {
        GapLayer {
            name: name.into(),
            cache: None,
        }
    }
}

impl<R: Real> Layer<R> for GapLayer {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> LayerKind {
        LayerKind::GlobalAvgPool
    }
    fn forward(&mut self, x: &Tensor<R>, _ctx: &mut ForwardCtx<'_>) -> Result<Tensor<R>> {
        let (y, cache) = global_average_pool(x)?;
        self.cache = Some(cache);
        Ok(y)
    }
    fn infer(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        Ok(global_average_pool(x)?.0)
    }
    fn backward(&mut self, dy: &Tensor<R>) -> Result<Tensor<R>> {
        global_average_pool_backward(take(&mut self.cache, &self.name)?, dy)
    }
}

pub struct GatingLayer<R: Real> {
    name: String,
    pub module: GatingModule<R>,
    cache: Option<GatingCache<R>>,
}

impl<R: Real> GatingLayer<R> {
    pub fn new(name: impl Into<String>, module: GatingModule<R>) -> Self {
        GatingLayer {
            name: name.into(),
            module,
            cache: None,
        }
    }
}

impl<R: Real> Layer<R> for GatingLayer<R> {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> LayerKind {
        LayerKind::Gating
    }
    fn forward(&mut self, x: &Tensor<R>, _ctx: &mut ForwardCtx<'_>) -> Result<Tensor<R>> {
        let (y, cache) = apply_gating(x, &self.module)?;
        self.cache = Some(cache);
        Ok(y)
    }
    fn infer(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        Ok(apply_gating(x, &self.module)?.0)
    }
    fn backward(&mut self, dy: &Tensor<R>) -> Result<Tensor<R>> {
        let (dx, g) = gating_backward(take(&mut self.cache, &self.name)?, dy)?;
        self.module.fc1_weights.accumulate_grad(g.fc1_weights.data());
        self.module.fc1_bias.accumulate_grad(g.fc1_bias.data());
        self.module.fc2_weights.accumulate_grad(g.fc2_weights.data());
        self.module.fc2_bias.accumulate_grad(g.fc2_bias.data());
        Ok(dx)
    }
    fn params(&self) -> Vec<(&'static str, &Tensor<R>)> {
        vec![
            ("fc1.weights", &self.module.fc1_weights),
            ("fc1.bias", &self.module.fc1_bias),
            ("fc2.weights", &self.module.fc2_weights),
            ("fc2.bias", &self.module.fc2_bias),
        ]
    }
    fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor<R>)> {
        vec![
            ("fc1.weights", &mut self.module.fc1_weights),
            ("fc1.bias", &mut self.module.fc1_bias),
            ("fc2.weights", &mut self.module.fc2_weights),
            ("fc2.bias", &mut self.module.fc2_bias),
        ]
    }
}

pub struct DenseLayer<R: Real> {
    name: String,
    pub weights: Tensor<R>,
    pub bias: Tensor<R>,
    cache: Option<DenseCache<R>>,
    /// Test hook: scales the weight gradient (1.0 in normal operation).
    grad_scale: R,
}

impl<R: Real> DenseLayer<R> {
    pub fn new(name: impl Into<String>, weights: Tensor<R>, bias: Tensor<R>) -> Self {
        DenseLayer {
            name: name.into(),
            weights,
            bias,
            cache: None,
            grad_scale: R::one(),
        }
    }

}

impl<R: Real> Layer<R> for DenseLayer<R> {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> LayerKind {
        LayerKind::Dense
    }
    fn forward(&mut self, x: &Tensor<R>, _ctx: &mut ForwardCtx<'_>) -> Result<Tensor<R>> {
        let (y, cache) = dense_forward(x, &self.weights, &self.bias)?;
        self.cache = Some(cache);
        Ok(y)
    }
    fn infer(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        Ok(dense_forward(x, &self.weights, &self.bias)?.0)
    }
    fn backward(&mut self, dy: &Tensor<R>) -> Result<Tensor<R>> {
        let g = dense_backward(take(&mut self.cache, &self.name)?, dy)?;
        if self.grad_scale == R::one() {
            self.weights.accumulate_grad(g.dw.data());
        } else {
            let scaled: Vec<R> = g.dw.data().iter().map(|&v| v * self.grad_scale).collect();
            self.weights.accumulate_grad(&scaled);
        }
        self.bias.accumulate_grad(g.db.data());
        Ok(g.dx)
    }
    fn params(&self) -> Vec<(&'static str, &Tensor<R>)> {
        vec![("weights", &self.weights), ("bias", &self.bias)]
    }
    fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor<R>)> {
        vec![("weights", &mut self.weights), ("bias", &mut self.bias)]
    }
    fn plant_gradient_fault(&mut self, scale: f64) -> bool {
        self.grad_scale = R::of(scale);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn second_backward_is_a_usage_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut layer = DenseLayer::<f64>::new("d", Tensor::zeros(&[2, 2]), Tensor::zeros(&[2]));
        let mut ctx = ForwardCtx { mode: Mode::Train, rng: &mut rng };
        let y = layer.forward(&Tensor::zeros(&[1, 2]), &mut ctx).unwrap();
        layer.backward(&y).unwrap();
        assert!(matches!(layer.backward(&y), Err(Error::Usage(_))));
    }

    #[test]
    fn conv_backward_without_forward() {
        let mut layer = Conv1dLayer::<f64>::new("c", Tensor::zeros(&[3, 1, 1]), Tensor::zeros(&[1]));
        assert!(matches!(layer.backward(&Tensor::zeros(&[4, 1])), Err(Error::Usage(_))));
    }

    #[test]
    fn frozen_dropout_repeats_its_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut layer = DropoutLayer::<f64>::new("dr", 0.5, true).unwrap();
        assert!(layer.stochastic());
        layer.set_frozen(true);
        let x = Tensor::full(&[4, 3, 8], 1.0);
        let mut ctx = ForwardCtx { mode: Mode::Train, rng: &mut rng };
        assert!(!layer.stochastic());
        let a = layer.forward(&x, &mut ctx).unwrap();
        let b = layer.forward(&x, &mut ctx).unwrap();
        assert_eq!(a, b);
    }
}
