use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gating::DEFAULT_REDUCTION;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvBlockSpec {
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
    pub spatial_dropout: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecurrentKind {
    Lstm,
    Gru,
    Bilstm,
}

impl RecurrentKind {
    /// Feature width emitted per time step for a given hidden size.
    pub fn output_width(self, hidden: usize) -> usize {
        match self {
            RecurrentKind::Bilstm => 2 * hidden,
            _ => hidden,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RecurrentKind::Lstm => "lstm",
            RecurrentKind::Gru => "gru",
            RecurrentKind::Bilstm => "bilstm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecurrentLayerSpec {
    pub kind: RecurrentKind,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadLayerSpec {
    pub width: usize,
    pub dropout: f64,
}

/// Declarative description of one network variant. Serialises to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub name: String,
    #[serde(default = "default_length")]
    pub input_length: usize,
    #[serde(default = "default_leads")]
    pub input_leads: usize,
    #[serde(default = "default_conv_blocks")]
    pub conv_blocks: Vec<ConvBlockSpec>,
    #[serde(default)]
    pub recurrent_stack: Vec<RecurrentLayerSpec>,
    #[serde(default = "default_true")]
    pub gating_enabled: bool,
    #[serde(default = "default_reduction")]
    pub gating_reduction: usize,
    #[serde(default = "default_head")]
    pub head: Vec<HeadLayerSpec>,
    #[serde(default = "default_classes")]
    pub num_classes: usize,
    /// Spatial dropout between consecutive recurrent layers.
    #[serde(default = "default_inter_dropout")]
    pub inter_recurrent_dropout: f64,
}

fn default_length() -> usize {
    1000
}
fn default_leads() -> usize {
    12
}
fn default_true() -> bool {
    true
}
fn default_reduction() -> usize {
    DEFAULT_REDUCTION
}
fn default_classes() -> usize {
    23
}
fn default_inter_dropout() -> f64 {
    0.1
}

pub fn default_conv_blocks() -> Vec<ConvBlockSpec> {
    [(64, 15, 2, 0.1), (128, 10, 2, 0.1), (256, 5, 2, 0.0)]
        .into_iter()
        .map(|(filters, kernel, pool, spatial_dropout)| ConvBlockSpec {
            filters,
            kernel,
            pool,
            spatial_dropout,
        })
        .collect()
}

pub fn default_head() -> Vec<HeadLayerSpec> {
    vec![
        HeadLayerSpec { width: 512, dropout: 0.5 },
        HeadLayerSpec { width: 256, dropout: 0.5 },
    ]
}

impl Default for ArchitectureSpec {
    fn default() -> Self {
        ArchitectureSpec {
            name: "custom".into(),
            input_length: default_length(),
            input_leads: default_leads(),
            conv_blocks: default_conv_blocks(),
            recurrent_stack: Vec::new(),
            gating_enabled: true,
            gating_reduction: DEFAULT_REDUCTION,
            head: default_head(),
            num_classes: default_classes(),
            inter_recurrent_dropout: default_inter_dropout(),
        }
    }
}

fn check_rate(what: &str, rate: f64) -> Result<()> {
    if rate.is_finite() && (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what}: dropout rate {rate} must lie in [0, 1)")))
    }
}

impl ArchitectureSpec {
    pub fn with_recurrent(name: &str, stack: &[(RecurrentKind, usize)]) -> Self {
        ArchitectureSpec {
            name: name.into(),
            recurrent_stack: stack
                .iter()
                .map(|&(kind, hidden)| RecurrentLayerSpec { kind, hidden })
                .collect(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::Validation("num_classes must be at least 1".into()));
        }
        if self.input_leads == 0 || self.input_length == 0 {
            return Err(Error::Validation("input length and lead count must be positive".into()));
        }
        if self.gating_reduction == 0 {
            return Err(Error::Validation("gating_reduction must be positive".into()));
        }
        check_rate("inter_recurrent_dropout", self.inter_recurrent_dropout)?;
        let mut t = self.input_length;
        for (i, b) in self.conv_blocks.iter().enumerate() {
            if b.filters == 0 || b.kernel == 0 || b.pool == 0 {
                return Err(Error::Validation(format!(
                    "conv block {}: filters, kernel and pool must be positive",
                    i + 1
                )));
            }
            check_rate(&format!("conv block {}", i + 1), b.spatial_dropout)?;
            t /= b.pool;
            if t == 0 {
                return Err(Error::Validation(format!(
                    "conv block {}: pooling collapses the time axis of a length-{} input",
                    i + 1,
                    self.input_length
                )));
            }
        }
        for (i, r) in self.recurrent_stack.iter().enumerate() {
            if r.hidden == 0 {
                return Err(Error::Validation(format!("recurrent layer {}: hidden must be positive", i + 1)));
            }
        }
        for (i, h) in self.head.iter().enumerate() {
            if h.width == 0 {
                return Err(Error::Validation(format!("head layer {}: width must be positive", i + 1)));
            }
            check_rate(&format!("head layer {}", i + 1), h.dropout)?;
        }
        Ok(())
    }

    /// Time steps remaining after the conv stack.
    pub fn feature_steps(&self) -> usize {
        self.conv_blocks.iter().fold(self.input_length, |t, b| t / b.pool)
    }

    /// Channel width entering global average pooling.
    pub fn pooled_width(&self) -> usize {
        match self.recurrent_stack.last() {
            Some(r) => r.kind.output_width(r.hidden),
            None => self.conv_blocks.last().map_or(self.input_leads, |b| b.filters),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ArchitectureSpec =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("architecture spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub const PRESET_NAMES: [&str; 6] = ["CNN", "LSTM", "BiLSTM", "GRU", "LSTM+BiLSTM", "GRU+BiLSTM+LSTM"];

/// The six comparison variants, all gated and sharing the default conv/head.
pub fn presets() -> BTreeMap<String, ArchitectureSpec> {
    use RecurrentKind::*;
    let stacks: [(&str, &[(RecurrentKind, usize)]); 6] = [
        ("CNN", &[]),
        ("LSTM", &[(Lstm, 128)]),
        ("BiLSTM", &[(Bilstm, 128)]),
        ("GRU", &[(Gru, 128)]),
        ("LSTM+BiLSTM", &[(Lstm, 128), (Bilstm, 128)]),
        ("GRU+BiLSTM+LSTM", &[(Gru, 128), (Bilstm, 128), (Lstm, 128)]),
    ];
    stacks
        .iter()
        .map(|(name, stack)| (name.to_string(), ArchitectureSpec::with_recurrent(name, stack)))
        .collect()
}

pub fn preset(name: &str) -> Result<ArchitectureSpec> {
    presets().remove(name).ok_or_else(|| {
        Error::Config(format!("unknown preset {name:?}; expected one of {}", PRESET_NAMES.join(", ")))
    })
}
