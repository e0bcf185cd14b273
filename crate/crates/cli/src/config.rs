//! Run configuration: a JSON file whose every field can be overridden by a flag.
//!
//! ```json
//! {
//!   "data_root": "/data/ptb-xl",
//!   "out": "runs/bilstm",
//!   "preset": "BiLSTM",
//!   "spec": null,
//!   "seed": 7,
//!   "synthetic": false,
//!   "ablate_gating": false,
//!   "parallel": false,
//!   "split": "test",
//!   "optimize_thresholds": false,
//!   "check_anchors": false,
//!   "train": { "batch_size": 32, "max_epochs": 100, "learning_rate": 0.001 },
//!   "synth": { "n_records": 1000, "n_classes": 3, "seed": 0 },
//!   "regression": { "tolerance": 0.02 }
//! }
//! ```
//!
//! Missing fields take their defaults; unknown fields are rejected.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ecgnet_core::data::LabelSpace;
use ecgnet_core::model::preset;
use ecgnet_core::reporting::RegressionConfig;
use ecgnet_core::training::TrainConfig;
use ecgnet_core::ArchitectureSpec;
use serde::{Deserialize, Serialize};

use crate::exit::config_error;
use crate::synth::SynthConfig;

pub const DATA_ROOT_ENV: &str = "ECGNET_DATA_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    Val,
    Test,
}

impl EvalSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalSplit::Val => "val",
            EvalSplit::Test => "test",
        }
    }
}

impl std::str::FromStr for EvalSplit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "val" => Ok(EvalSplit::Val),
            "test" => Ok(EvalSplit::Test),
            other => Err(format!("split must be val or test, not {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_root: Option<PathBuf>,
    pub out: PathBuf,
    pub preset: String,
    /// Architecture spec file; takes precedence over `preset`.
    pub spec: Option<PathBuf>,
    pub seed: u64,
    /// Train on a generated corpus (created under `<out>/synthetic-data` when no data root is given).
    pub synthetic: bool,
    pub ablate_gating: bool,
    pub parallel: bool,
    pub split: EvalSplit,
    /// Tune per-class thresholds on the validation split before evaluating.
    pub optimize_thresholds: bool,
    /// Also write deviations from the published results (full-corpus runs only).
    pub check_anchors: bool,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub regression: RegressionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_root: None,
            out: PathBuf::from("runs"),
            preset: "CNN".into(),
            spec: None,
            seed: 0,
            synthetic: false,
            ablate_gating: false,
            parallel: false,
            split: EvalSplit::Test,
            optimize_thresholds: false,
            check_anchors: false,
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
            regression: RegressionConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Directory holding the corpus. Synthetic runs default to a directory
    /// inside the output directory.
    pub fn resolved_data_root(&self) -> Result<PathBuf> {
        match (&self.data_root, self.synthetic) {
            (Some(root), _) => Ok(root.clone()),
            (None, true) => Ok(self.out.join("synthetic-data")),
            (None, false) => Err(config_error(format!(
                "no data root: pass --data-root, set {DATA_ROOT_ENV}, or use --synthetic"
            ))),
        }
    }

    /// The architecture to train, sized to the corpus label space.
    pub fn architecture(&self, labels: &LabelSpace) -> Result<ArchitectureSpec> {
        let mut spec = match &self.spec {
            Some(path) => ArchitectureSpec::from_json_file(path)?,
            None => preset(&self.preset)?,
        };
        spec.num_classes = labels.len();
        if self.ablate_gating {
            spec.gating_enabled = false;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        if self.synthetic {
            self.synth.validate()?;
        }
        if self.spec.is_none() {
            preset(&self.preset)?;
        }
        Ok(())
    }
}
