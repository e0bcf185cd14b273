//! Five-way cross-validation over the non-test folds.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::trainer::{make_generators, predict_set, train, TrainConfig, TrainLog};
use crate::data::{partition_folds, RecordMeta, SignalSource, TEST_FOLD};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricsReport, AGGREGATE_COLUMNS};
use crate::model::{build, ArchitectureSpec};
use crate::real::Real;

/// Validation folds of each cross-validation split.
pub const CV_GROUPS: [&[u8]; 5] = [&[1, 2], &[3, 4], &[5, 6], &[7, 8], &[9]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub split: usize,
    pub val_folds: Vec<u8>,
    pub seed: u64,
    pub train_records: usize,
    pub val_records: usize,
    pub log: TrainLog,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub aggregate: BTreeMap<String, MeanStd>,
}

/// Every (train, validation) record partition used by [`cross_validate`].
/// Rejects any test-fold record.
pub fn cv_partitions(records: &[RecordMeta]) -> Result<Vec<(crate::data::TrainSet, Vec<RecordMeta>)>> {
    if let Some(r) = records.iter().find(|r| r.fold == TEST_FOLD) {
        return Err(Error::Integrity(format!(
            "record {} belongs to the held-out test fold and may not enter cross-validation",
            r.ecg_id
        )));
    }
    CV_GROUPS
        .iter()
        .map(|val_folds| {
            let train_folds: Vec<u8> = (1..TEST_FOLD).filter(|f| !val_folds.contains(f)).collect();
            partition_folds(records, &train_folds, val_folds)
        })
        .collect()
}

/// Trains a fresh model per split (seed `cfg.seed + i`) and evaluates it on
/// that split's validation folds. With `parallel`, splits run on separate threads.
pub fn cross_validate<R: Real>(
    spec: &ArchitectureSpec,
    records: &[RecordMeta],
    source: Arc<dyn SignalSource>,
    class_names: &[String],
    cfg: &TrainConfig,
    parallel: bool,
) -> Result<CvReport> {
    let parts = cv_partitions(records)?;
    let run = |i: usize, train_set: &crate::data::TrainSet, val: &[RecordMeta]| -> Result<FoldResult> {
        let seed = cfg.seed + i as u64;
        let fold_cfg = TrainConfig { seed, ..cfg.clone() };
        let (_, train_gen, val_gen) = make_generators(train_set, val, Arc::clone(&source), &fold_cfg)?;
        let mut model = build::<R>(spec, seed)?;
        let log = train(&mut model, &train_gen, &val_gen, class_names, &fold_cfg)?;
        let (preds, _) = predict_set(&model, &val_gen, class_names, fold_cfg.label_smoothing)?;
        Ok(FoldResult {
            split: i,
            val_folds: CV_GROUPS[i].to_vec(),
            seed,
            train_records: train_set.len(),
            val_records: val.len(),
            log,
            report: evaluate(&preds)?,
        })
    };
    let folds: Vec<FoldResult> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = parts
                .iter()
                .enumerate()
                .map(|(i, (t, v))| {
                    let run = &run;
                    s.spawn(move || run(i, t, v))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().map_err(|_| Error::Numeric("cross-validation worker panicked".into()))?)
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        parts.iter().enumerate().map(|(i, (t, v))| run(i, t, v)).collect::<Result<Vec<_>>>()?
    };
    Ok(CvReport {
        aggregate: aggregate(folds.iter().map(|f| &f.report)),
        folds,
    })
}

/// Mean and standard deviation of every aggregate metric across reports.
pub fn aggregate<'a>(reports: impl Iterator<Item = &'a MetricsReport> + Clone) -> BTreeMap<String, MeanStd> {
    AGGREGATE_COLUMNS
        .iter()
        .chain(["label_accuracy", "weighted_f1", "weighted_precision", "weighted_recall"].iter())
        .map(|&m| {
            let vals: Vec<f64> = reports.clone().filter_map(|r| r.metric(m)).collect();
            (m.to_string(), MeanStd::of(&vals))
        })
        .collect()
}
