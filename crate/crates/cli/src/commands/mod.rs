//! Command implementations. Each writes its outputs (plus a provenance
//! record) under the configured output directory and returns a summary.

mod compare;
mod evaluate;
mod gradcheck;
mod prepare;
mod train;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use ecgnet_core::data::{split_by_fold, Corpus, RecordMeta, SignalSource, Split, WfdbSource, DATABASE_CSV};

use crate::config::{EvalSplit, RunConfig};
use crate::provenance::Provenance;
use crate::synth::{make_synthetic, SynthManifest};

pub use compare::{compare, CompareOutput, VariantOutcome};
pub use evaluate::{evaluate, evaluate_on, EvaluateOutput};
pub use gradcheck::{gradcheck, GradcheckOutput, DEFAULT_CASES, LAYER_COVERAGE};
pub use prepare::{format_summary, prepare, CorpusReport, PrepareOutput};
pub use train::{cross_validate, train, train_on, TrainOutput};

/// A loaded corpus with its fixed split and signal source.
pub struct Dataset {
    pub root: PathBuf,
    pub corpus: Corpus,
    pub split: Split,
    pub source: Arc<dyn SignalSource>,
}

impl Dataset {
    pub fn records(&self, which: EvalSplit) -> &[RecordMeta] {
        match which {
            EvalSplit::Val => &self.split.val,
            EvalSplit::Test => &self.split.test,
        }
    }

    pub fn class_names(&self) -> &[String] {
        self.corpus.label_space.names()
    }
}

/// Loads the corpus the config points at, generating the synthetic one first
/// when it is requested and absent.
pub fn open_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let root = cfg.resolved_data_root()?;
    if cfg.synthetic && !root.join(DATABASE_CSV).exists() {
        log::info!("generating synthetic corpus in {}", root.display());
        make_synthetic(&root, &cfg.synth)?;
    }
    let corpus = Corpus::load(&root).with_context(|| format!("loading corpus index from {}", root.display()))?;
    let split = split_by_fold(&corpus.records)?;
    let source: Arc<dyn SignalSource> = Arc::new(WfdbSource::ptbxl(&root));
    Ok(Dataset {
        root,
        corpus,
        split,
        source,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

/// `synth`: writes a synthetic corpus to the output directory.
pub fn synth(cfg: &RunConfig) -> Result<SynthManifest> {
    let manifest = make_synthetic(&cfg.out, &cfg.synth)?;
    Provenance::new("synth", cfg)
        .with_corpus(&cfg.out)?
        .write(&cfg.out, &["synthetic.json"])?;
    Ok(manifest)
}
