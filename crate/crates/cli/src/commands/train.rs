use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Result;
use ecgnet_core::data::RecordMeta;
use ecgnet_core::model::{save_checkpoint, ParameterCount};
use ecgnet_core::training::{self, make_generators, CvReport, TrainLog};
use ecgnet_core::{build, ArchitectureSpec};

use super::prepare::STANDARDIZATION;
use super::{create_dir, open_dataset, write_json, Dataset};
use crate::config::RunConfig;
use crate::provenance::Provenance;

pub const CHECKPOINT: &str = "model.ckpt";
pub const TRAIN_LOG_CSV: &str = "train_log.csv";
pub const TRAIN_LOG_JSON: &str = "train_log.json";
pub const SPEC_JSON: &str = "spec.json";
pub const PARAMETERS_JSON: &str = "parameters.json";

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub spec: ArchitectureSpec,
    pub log: TrainLog,
    pub parameters: ParameterCount,
    pub checkpoint: PathBuf,
}

/// `train`: fits the configured architecture and writes the best checkpoint.
pub fn train(cfg: &RunConfig) -> Result<TrainOutput> {
    let data = open_dataset(cfg)?;
    train_on(cfg, &data, &cfg.out)
}

/// Trains on an already opened dataset, writing into `out`.
pub fn train_on(cfg: &RunConfig, data: &Dataset, out: &Path) -> Result<TrainOutput> {
    cfg.validate()?;
    create_dir(out)?;
    let spec = cfg.architecture(&data.corpus.label_space)?;
    let tcfg = cfg.train_config();
    let (stats, train_gen, val_gen) = make_generators(&data.split.train, &data.split.val, Arc::clone(&data.source), &tcfg)?;
    let mut model = build::<f32>(&spec, tcfg.seed)?;
    let parameters = model.count_parameters();
    log::info!(
        "training {} ({} parameters) on {} records, validating on {}",
        spec.name,
        parameters.total,
        train_gen.len(),
        val_gen.len()
    );
    let log = training::train(&mut model, &train_gen, &val_gen, data.class_names(), &tcfg)?;

    let checkpoint = out.join(CHECKPOINT);
    save_checkpoint(&model, &checkpoint)?;
    stats.save(&out.join(STANDARDIZATION))?;
    log.write_csv(&out.join(TRAIN_LOG_CSV))?;
    write_json(&out.join(TRAIN_LOG_JSON), &log)?;
    std::fs::write(out.join(SPEC_JSON), spec.to_json()?)?;
    write_json(&out.join(PARAMETERS_JSON), &parameters)?;

    let mut prov = Provenance::new("train", cfg).with_corpus(&data.root)?;
    prov.add_input("train_split", data.split.train.fingerprint());
    prov.note("architecture", spec.name.clone());
    prov.note("gating", spec.gating_enabled.to_string());
    // The log CSV carries wall-clock seconds, so it is not hashed.
    prov.write(out, &[CHECKPOINT, STANDARDIZATION, TRAIN_LOG_JSON, SPEC_JSON, PARAMETERS_JSON])?;
    Ok(TrainOutput {
        spec,
        log,
        parameters,
        checkpoint,
    })
}

pub const CV_REPORT: &str = "cv_report.json";
pub const CV_SUMMARY: &str = "cv_summary.csv";

/// Five-way cross-validation over the training and validation folds. The
/// test fold never enters.
pub fn cross_validate(cfg: &RunConfig) -> Result<CvReport> {
    cfg.validate()?;
    let data = open_dataset(cfg)?;
    create_dir(&cfg.out)?;
    let spec = cfg.architecture(&data.corpus.label_space)?;
    let records: Vec<RecordMeta> = data.split.train.records().iter().chain(&data.split.val).cloned().collect();
    let report = training::cross_validate::<f32>(
        &spec,
        &records,
        Arc::clone(&data.source),
        data.class_names(),
        &cfg.train_config(),
        cfg.parallel,
    )?;
    write_json(&cfg.out.join(CV_REPORT), &report)?;
    let mut w = csv::Writer::from_path(cfg.out.join(CV_SUMMARY))?;
    w.write_record(["metric", "mean", "std"])?;
    for (m, v) in &report.aggregate {
        w.write_record([m.clone(), format!("{:.6}", v.mean), format!("{:.6}", v.std)])?;
    }
    w.flush()?;
    let mut prov = Provenance::new("cv", cfg).with_corpus(&data.root)?;
    prov.note("architecture", spec.name.clone());
    prov.write(&cfg.out, &[CV_SUMMARY])?;
    Ok(report)
}
