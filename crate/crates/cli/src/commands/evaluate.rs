use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use ecgnet_core::data::{fit_standardization, StandardizationStats};
use ecgnet_core::metrics::{evaluate as evaluate_predictions, optimize_thresholds, MetricsReport, ThresholdPolicy};
use ecgnet_core::model::load_checkpoint;
use ecgnet_core::reporting::{per_class_regression, regression_for_report, PublishedAnchors};
use ecgnet_core::training::{eval_generator, predict_set};
use ecgnet_core::{Error, Model};

use super::prepare::STANDARDIZATION;
use super::train::CHECKPOINT;
use super::{create_dir, open_dataset, write_json, Dataset};
use crate::config::RunConfig;
use crate::provenance::Provenance;

#[derive(Debug, Clone)]
pub struct EvaluateOutput {
    pub report: MetricsReport,
    pub thresholds: Option<Vec<f64>>,
    pub files: Vec<String>,
}

/// `evaluate`: metrics of a checkpoint on the validation or test split.
/// Without an explicit checkpoint, `<out>/model.ckpt` is used.
pub fn evaluate(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<EvaluateOutput> {
    let data = open_dataset(cfg)?;
    let ckpt: PathBuf = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| cfg.out.join(CHECKPOINT));
    evaluate_on(cfg, &data, &ckpt, &cfg.out)
}

/// Standardisation statistics saved beside the checkpoint, checked against
/// the current training split; refitted when absent.
fn stats_for(data: &Dataset, checkpoint: &Path) -> Result<Arc<StandardizationStats>> {
    let saved = checkpoint.with_file_name(STANDARDIZATION);
    if saved.exists() {
        let stats = StandardizationStats::load(&saved)?;
        let current = data.split.train.fingerprint();
        if stats.train_fingerprint() != current {
            return Err(Error::Integrity(format!(
                "{} was fitted on a different training split ({} vs {current})",
                saved.display(),
                stats.train_fingerprint()
            ))
            .into());
        }
        return Ok(Arc::new(stats));
    }
    Ok(Arc::new(fit_standardization(&data.split.train, data.source.as_ref())?))
}

pub fn evaluate_on(cfg: &RunConfig, data: &Dataset, checkpoint: &Path, out: &Path) -> Result<EvaluateOutput> {
    create_dir(out)?;
    let model: Model<f32> =
        load_checkpoint(checkpoint).with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let spec = model.spec();
    let names = data.class_names();
    if spec.num_classes != names.len() {
        return Err(Error::Validation(format!(
            "checkpoint predicts {} classes but the corpus has {}",
            spec.num_classes,
            names.len()
        ))
        .into());
    }
    let (length, leads) = data.source.shape();
    if (spec.input_length, spec.input_leads) != (length, leads) {
        return Err(Error::Validation(format!(
            "checkpoint expects {}×{} inputs but the corpus provides {length}×{leads}",
            spec.input_length, spec.input_leads
        ))
        .into());
    }
    let stats = stats_for(data, checkpoint)?;
    let batch = cfg.train.batch_size;
    let smoothing = cfg.train.label_smoothing;
    let split = cfg.split;
    let gen = eval_generator(data.records(split), Arc::clone(&data.source), &stats, batch, 0)?;
    let (mut preds, _) = predict_set(&model, &gen, names, smoothing)?;

    let tag = split.as_str();
    let mut files = Vec::new();
    let mut thresholds = None;
    if cfg.optimize_thresholds {
        let val_gen = eval_generator(&data.split.val, Arc::clone(&data.source), &stats, batch, 0)?;
        let (val_preds, _) = predict_set(&model, &val_gen, names, smoothing)?;
        let t = optimize_thresholds(&val_preds);
        preds = preds.with_threshold(ThresholdPolicy::PerClass(t.clone()))?;
        let name = "thresholds.json".to_string();
        write_json(&out.join(&name), &names.iter().zip(&t).collect::<std::collections::BTreeMap<_, _>>())?;
        files.push(name);
        thresholds = Some(t);
    }
    let report = evaluate_predictions(&preds)?;
    if !report.undefined_classes.is_empty() {
        log::warn!("classes without positives in the {tag} split: {}", report.undefined_classes.join(", "));
    }
    let json = format!("metrics_{tag}.json");
    let aggregate = format!("metrics_{tag}_aggregate.csv");
    let per_class = format!("metrics_{tag}_per_class.csv");
    report.save_json(&out.join(&json))?;
    report.write_aggregate_csv(&out.join(&aggregate), &spec.name)?;
    report.write_per_class_csv(&out.join(&per_class))?;
    files.extend([json, aggregate, per_class]);

    if cfg.check_anchors {
        let anchors = PublishedAnchors::bundled();
        let name = format!("anchor_deviation_{tag}.csv");
        let table = regression_for_report(&report, &anchors, &spec.name, &cfg.regression)?;
        table.write_csv(&out.join(&name))?;
        let pc_name = format!("anchor_deviation_{tag}_per_class.csv");
        per_class_regression(&report, &anchors, &cfg.regression).write_csv(&out.join(&pc_name))?;
        log::info!("{} of {} aggregate metrics within tolerance of the published values", table.rows.len() - table.failures().len(), table.rows.len());
        files.extend([name, pc_name]);
    }

    let mut prov = Provenance::new(&format!("evaluate_{tag}"), cfg).with_corpus(&data.root)?;
    prov.add_input_file("checkpoint", checkpoint)?;
    prov.add_input("train_split", stats.train_fingerprint());
    let refs: Vec<&str> = files.iter().map(String::as_str).collect();
    prov.write(out, &refs)?;
    Ok(EvaluateOutput { report, thresholds, files })
}
