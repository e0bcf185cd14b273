//! Network assembly from an [`ArchitectureSpec`], parameter accounting and
//! checkpointing.

mod checkpoint;
mod gating;
mod init;
mod layers;
mod spec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_into, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use gating::{
    apply_gating, apply_optional_gating, gating_backward, gating_hidden, GatingCache, GatingGrads, GatingModule,
    DEFAULT_REDUCTION, MIN_GATING_HIDDEN,
};
pub use layers::{
    ActivationLayer, BatchNormLayer, BiLstmLayer, Conv1dLayer, DenseLayer, DropoutLayer, ForwardCtx, GapLayer,
    GatingLayer, Layer, LayerKind, MaxPoolLayer, RecurrentLayer,
};
pub use spec::{
    default_conv_blocks, default_head, preset, presets, ArchitectureSpec, ConvBlockSpec, HeadLayerSpec,
    RecurrentKind, RecurrentLayerSpec, PRESET_NAMES,
};

use crate::error::{Error, Result};
use crate::kernels::{Activation, Mode};
use crate::real::Real;
use crate::recurrent::{CellKind, RecurrentParams};
use crate::seed;
use crate::tensor::Tensor;
use init::he_normal;

/// Trainable parameter count of one layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerCount {
    pub name: String,
    pub kind: LayerKind,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParameterCount {
    pub total: usize,
    pub layers: Vec<LayerCount>,
}

impl ParameterCount {
    pub fn layer(&self, name: &str) -> Option<usize> {
        self.layers.iter().find(|l| l.name == name).map(|l| l.params)
    }

    /// Parameters held by LSTM, GRU and BiLSTM layers.
    pub fn recurrent(&self) -> usize {
        self.layers.iter().filter(|l| l.kind.is_recurrent()).map(|l| l.params).sum()
    }
}

/// Snapshot of every parameter and buffer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<R: Real> {
    pub tensors: Vec<(String, Vec<R>)>,
}

pub struct Model<R: Real = f32> {
    spec: ArchitectureSpec,
    seed: u64,
    layers: Vec<Box<dyn Layer<R>>>,
    dropout_rng: ChaCha8Rng,
}

impl<R: Real> std::fmt::Debug for Model<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("spec", &self.spec.name)
            .field("seed", &self.seed)
            .field("layers", &self.layers.iter().map(|l| l.name().to_string()).collect::<Vec<_>>())
            .finish()
    }
}

fn layer_rng(seed: u64, name: &str) -> ChaCha8Rng {
    seed::rng(seed, "init", &[seed::derive(0, name, &[])])
}

fn dense<R: Real>(name: &str, d_in: usize, d_out: usize, seed: u64) -> DenseLayer<R> {
    let mut w = Tensor::zeros(&[d_in, d_out]);
    he_normal(&mut w, d_in, &mut layer_rng(seed, name));
    DenseLayer::new(name, w, Tensor::zeros(&[d_out]))
}

/// Builds a network. Every parameterised layer draws its initial weights from
/// an RNG derived from `(seed, layer name)`, so toggling one component (for
/// example the gate) leaves all other initial weights unchanged.
pub fn build<R: Real>(spec: &ArchitectureSpec, seed: u64) -> Result<Model<R>> {
    spec.validate()?;
    let mut layers: Vec<Box<dyn Layer<R>>> = Vec::new();
    let mut channels = spec.input_leads;

    for (i, block) in spec.conv_blocks.iter().enumerate() {
        let n = i + 1;
        let name = format!("conv1d_{n}");
        let mut w = Tensor::zeros(&[block.kernel, channels, block.filters]);
        he_normal(&mut w, block.kernel * channels, &mut layer_rng(seed, &name));
        layers.push(Box::new(Conv1dLayer::new(&name, w, Tensor::zeros(&[block.filters]))));
        layers.push(Box::new(BatchNormLayer::new(format!("{name}_bn"), block.filters)));
        layers.push(Box::new(ActivationLayer::new(format!("{name}_relu"), Activation::Relu)));
        layers.push(Box::new(MaxPoolLayer::new(format!("pool_{n}"), block.pool)));
        if block.spatial_dropout > 0.0 {
            layers.push(Box::new(DropoutLayer::new(format!("sdrop_{n}"), block.spatial_dropout, true)?));
        }
        channels = block.filters;
    }

    for (i, r) in spec.recurrent_stack.iter().enumerate() {
        let n = i + 1;
        if i > 0 {
            layers.push(Box::new(BatchNormLayer::new(format!("rnn_bn_{n}"), channels)));
            if spec.inter_recurrent_dropout > 0.0 {
                layers.push(Box::new(DropoutLayer::new(
                    format!("rnn_sdrop_{n}"),
                    spec.inter_recurrent_dropout,
                    true,
                )?));
            }
        }
        let name = format!("{}_{n}", r.kind.as_str());
        match r.kind {
            RecurrentKind::Lstm | RecurrentKind::Gru => {
                let cell = if r.kind == RecurrentKind::Lstm { CellKind::Lstm } else { CellKind::Gru };
                let p = RecurrentParams::init(cell, channels, r.hidden, &mut layer_rng(seed, &name));
                layers.push(Box::new(RecurrentLayer::new(&name, p)));
            }
            RecurrentKind::Bilstm => {
                let f = RecurrentParams::init(CellKind::Lstm, channels, r.hidden, &mut layer_rng(seed, &format!("{name}.forward")));
                let b = RecurrentParams::init(CellKind::Lstm, channels, r.hidden, &mut layer_rng(seed, &format!("{name}.backward")));
                layers.push(Box::new(BiLstmLayer::new(&name, f, b)));
            }
        }
        channels = r.kind.output_width(r.hidden);
    }

    layers.push(Box::new(GapLayer::new("gap")));
    if spec.gating_enabled {
        let module = GatingModule::init(channels, spec.gating_reduction, &mut layer_rng(seed, "gating"));
        layers.push(Box::new(GatingLayer::new("gating", module)));
    }

    for (i, h) in spec.head.iter().enumerate() {
        let name = format!("dense_{}", i + 1);
        layers.push(Box::new(dense(&name, channels, h.width, seed)));
        layers.push(Box::new(BatchNormLayer::new(format!("{name}_bn"), h.width)));
        layers.push(Box::new(ActivationLayer::new(format!("{name}_relu"), Activation::Relu)));
        if h.dropout > 0.0 {
            layers.push(Box::new(DropoutLayer::new(format!("{name}_dropout"), h.dropout, false)?));
        }
        channels = h.width;
    }
    layers.push(Box::new(dense("output", channels, spec.num_classes, seed)));
    layers.push(Box::new(ActivationLayer::new("output_sigmoid", Activation::Sigmoid)));

    Ok(Model {
        spec: spec.clone(),
        seed,
        layers,
        dropout_rng: seed::rng(seed, "dropout", &[]),
    })
}

impl<R: Real> Model<R> {
    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Box<dyn Layer<R>>] {
        &self.layers
    }

    pub fn layer_names(&self) -> Vec<&str> {
        self.layers.iter().map(|l| l.name()).collect()
    }

    fn check_input(&self, x: &Tensor<R>) -> Result<()> {
        let ok = matches!(*x.shape(), [_, t, c] if t == self.spec.input_length && c == self.spec.input_leads);
        if ok {
            Ok(())
        } else {
            Err(Error::dim(format!(
                "model expects [B, {}, {}] input, got {:?}",
                self.spec.input_length,
                self.spec.input_leads,
                x.shape()
            )))
        }
    }

    /// Re-seeds the stream that draws dropout masks (for example once per epoch).
    pub fn reseed_dropout(&mut self, seed: u64) {
        self.dropout_rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// `[B, T, leads] → [B, num_classes]` probabilities. Train mode stores the
    /// caches needed by [`Model::backward`].
    pub fn forward(&mut self, x: &Tensor<R>, mode: Mode) -> Result<Tensor<R>> {
        self.check_input(x)?;
        let mut ctx = ForwardCtx { mode, rng: &mut self.dropout_rng };
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h, &mut ctx)?;
        }
        Ok(h)
    }

    /// Inference without caches or state changes; safe to call concurrently.
    pub fn predict(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.infer(&h)?;
        }
        Ok(h)
    }

    /// Output shape of every layer for a zero input of batch size `batch`.
    pub fn shape_trace(&self, batch: usize) -> Result<Vec<(String, Vec<usize>)>> {
        let mut h = Tensor::zeros(&[batch, self.spec.input_length, self.spec.input_leads]);
        let mut trace = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            h = layer.infer(&h)?;
            trace.push((layer.name().to_string(), h.shape().to_vec()));
        }
        Ok(trace)
    }

    /// Backpropagates the gradient of the loss with respect to the output
    /// probabilities, accumulating into parameter gradients. Returns the input gradient.
    pub fn backward(&mut self, d_probs: &Tensor<R>) -> Result<Tensor<R>> {
        let mut g = d_probs.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for layer in &mut self.layers {
            for (_, p) in layer.params_mut() {
                p.zero_grad();
            }
        }
    }

    /// Trainable tensors keyed `layer.param`.
    pub fn named_params(&self) -> Vec<(String, &Tensor<R>)> {
        self.layers
            .iter()
            .flat_map(|l| {
                let ln = l.name().to_string();
                l.params().into_iter().map(move |(p, t)| (format!("{ln}.{p}"), t))
            })
            .collect()
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Tensor<R>)> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                let ln = l.name().to_string();
                l.params_mut().into_iter().map(move |(p, t)| (format!("{ln}.{p}"), t))
            })
            .collect()
    }

    pub fn named_buffers(&self) -> Vec<(String, &Tensor<R>)> {
        self.layers
            .iter()
            .flat_map(|l| {
                let ln = l.name().to_string();
                l.buffers().into_iter().map(move |(p, t)| (format!("{ln}.{p}"), t))
            })
            .collect()
    }

    pub fn named_buffers_mut(&mut self) -> Vec<(String, &mut Tensor<R>)> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                let ln = l.name().to_string();
                l.buffers_mut().into_iter().map(move |(p, t)| (format!("{ln}.{p}"), t))
            })
            .collect()
    }

    /// Trainable element counts; batch-norm scale/shift count, running statistics do not.
    pub fn count_parameters(&self) -> ParameterCount {
        let layers: Vec<LayerCount> = self
            .layers
            .iter()
            .map(|l| LayerCount {
                name: l.name().to_string(),
                kind: l.kind(),
                params: l.param_count(),
            })
            .collect();
        ParameterCount {
            total: layers.iter().map(|l| l.params).sum(),
            layers,
        }
    }

    /// Freezes dropout masks so repeated train-mode forwards are identical.
    pub fn freeze_dropout_masks(&mut self, frozen: bool) {
        for layer in &mut self.layers {
            layer.set_frozen(frozen);
        }
    }

    /// Names of layers whose next train-mode forward would draw fresh randomness.
    pub fn stochastic_layers(&self) -> Vec<String> {
        self.layers
            .iter()
            .filter(|l| l.stochastic())
            .map(|l| l.name().to_string())
            .collect()
    }

    /// Corrupts the analytic weight gradient of a dense layer (test hook).
    pub fn plant_gradient_fault(&mut self, layer: &str, scale: f64) -> Result<()> {
        let l = self
            .layers
            .iter_mut()
            .find(|l| l.name() == layer)
            .ok_or_else(|| Error::Usage(format!("no layer named {layer:?}")))?;
        if l.plant_gradient_fault(scale) {
            Ok(())
        } else {
            Err(Error::Usage(format!("layer {layer:?} does not support fault planting")))
        }
    }

    pub fn state(&self) -> ModelState<R> {
        let mut tensors: Vec<(String, Vec<R>)> =
            self.named_params().into_iter().map(|(n, t)| (n, t.data().to_vec())).collect();
        tensors.extend(self.named_buffers().into_iter().map(|(n, t)| (n, t.data().to_vec())));
        ModelState { tensors }
    }

    pub fn load_state(&mut self, state: &ModelState<R>) -> Result<()> {
        let mut targets = self.named_params_mut();
        // Buffers cannot be borrowed alongside params through the same iterator chain,
        // so restore them in a second pass.
        let n_params = targets.len();
        if state.tensors.len() < n_params {
            return Err(Error::Validation("state has fewer tensors than the model".into()));
        }
        for ((name, t), (sname, data)) in targets.iter_mut().zip(&state.tensors[..n_params]) {
            if name != sname || t.len() != data.len() {
                return Err(Error::Validation(format!("state tensor {sname} does not match model tensor {name}")));
            }
            t.data_mut().copy_from_slice(data);
        }
        drop(targets);
        let mut bufs = self.named_buffers_mut();
        if state.tensors.len() != n_params + bufs.len() {
            return Err(Error::Validation(format!(
                "state holds {} tensors, model expects {}",
                state.tensors.len(),
                n_params + bufs.len()
            )));
        }
        for ((name, t), (sname, data)) in bufs.iter_mut().zip(&state.tensors[n_params..]) {
            if name != sname || t.len() != data.len() {
                return Err(Error::Validation(format!("state tensor {sname} does not match model tensor {name}")));
            }
            t.data_mut().copy_from_slice(data);
        }
        Ok(())
    }
}
