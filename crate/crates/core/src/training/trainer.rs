use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::adam::{clip_global_norm, AdamConfig, OptimizerState};
use super::loss::bce_smoothed_loss;
use super::schedule::{EarlyStopping, PlateauScheduler};
use crate::data::{fit_standardization, AugmentConfig, BatchGenerator, RecordMeta, SignalSource, StandardizationStats, TrainSet};
use crate::error::{Error, Result};
use crate::kernels::Mode;
use crate::metrics::{macro_auroc, PredictionSet};
use crate::model::Model;
use crate::real::Real;
use crate::seed;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub label_smoothing: f64,
    pub early_stop_patience: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    pub adam: AdamConfig,
    pub augment: AugmentConfig,
    /// Batches built ahead on a background thread (0 = inline).
    pub prefetch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 100,
            label_smoothing: 0.05,
            early_stop_patience: 10,
            plateau_patience: 5,
            plateau_factor: 0.5,
            min_lr: 1e-5,
            clip_norm: Some(5.0),
            seed: 0,
            adam: AdamConfig::default(),
            augment: AugmentConfig::default(),
            prefetch: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch size and max epochs must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad(format!("label smoothing {} outside [0, 1)", self.label_smoothing));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad(format!("plateau factor {} outside (0, 1)", self.plateau_factor));
        }
        if self.early_stop_patience == 0 || self.plateau_patience == 0 {
            return bad("patience values must be at least 1".into());
        }
        if !(self.min_lr >= 0.0) {
            return bad(format!("min lr {} must be non-negative", self.min_lr));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return bad(format!("clip norm {c} must be positive"));
            }
        }
        let a = self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be positive".into());
        }
        self.augment.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_macro_auroc: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters the model holds after training.
    pub best_epoch: usize,
    pub best_val_macro_auroc: f64,
    pub stopped_early: bool,
}

impl TrainLog {
    /// Everything except wall-clock time, for run-to-run comparisons.
    pub fn without_timing(&self) -> TrainLog {
        let mut l = self.clone();
        l.epochs.iter_mut().for_each(|e| e.seconds = 0.0);
        l
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        w.write_record(["epoch", "train_loss", "val_loss", "val_macro_auroc", "lr", "seconds"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                format!("{:.8}", e.train_loss),
                format!("{:.8}", e.val_loss),
                format!("{:.8}", e.val_macro_auroc),
                format!("{:e}", e.lr),
                format!("{:.3}", e.seconds),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Runs the model in inference mode over every batch of `data`, returning
/// the predictions and the mean smoothed loss.
pub fn predict_set<R: Real>(
    model: &Model<R>,
    data: &BatchGenerator,
    class_names: &[String],
    label_smoothing: f64,
) -> Result<(PredictionSet, f64)> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let mut loss_sum = 0.0;
    let mut n = 0usize;
    for batch in data.epoch(0) {
        let batch = batch?;
        let probs = model.predict(&batch.x.cast::<R>())?;
        probs.ensure_finite("predictions")?;
        let (loss, _) = bce_smoothed_loss(&probs, &batch.y.cast::<R>(), label_smoothing)?;
        loss_sum += loss * batch.len() as f64;
        n += batch.len();
        scores.extend(probs.data().iter().map(|v| v.as_f64()));
        labels.extend(batch.y.data().iter().map(|&v| (v >= 0.5) as u8));
    }
    if n == 0 {
        return Err(Error::Input("no records to predict".into()));
    }
    Ok((PredictionSet::new(scores, labels, class_names.to_vec())?, loss_sum / n as f64))
}

/// One optimisation step on a batch; returns the batch loss.
pub fn train_step<R: Real>(
    model: &mut Model<R>,
    opt: &mut OptimizerState,
    x: &Tensor<R>,
    y: &Tensor<R>,
    cfg: &TrainConfig,
) -> Result<f64> {
    let probs = model.forward(x, Mode::Train)?;
    let (loss, d_probs) = bce_smoothed_loss(&probs, y, cfg.label_smoothing)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("training loss became {loss}")));
    }
    model.zero_grad();
    model.backward(&d_probs)?;
    if let Some(c) = cfg.clip_norm {
        clip_global_norm(model, c);
    }
    opt.step_model(model)?;
    Ok(loss)
}

/// Trains `model` in place and leaves it holding the parameters of the epoch
/// with the highest validation macro-AUROC.
pub fn train<R: Real>(
    model: &mut Model<R>,
    train_data: &BatchGenerator,
    val_data: &BatchGenerator,
    class_names: &[String],
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    if train_data.is_empty() || val_data.is_empty() {
        return Err(Error::Input("training and validation sets must be non-empty".into()));
    }
    let mut opt = OptimizerState::new(cfg.learning_rate, cfg.adam);
    let mut stopper = EarlyStopping::new(cfg.early_stop_patience);
    let mut plateau = PlateauScheduler::new(cfg.plateau_patience, cfg.plateau_factor, cfg.min_lr);
    let mut best_state = model.state();
    let mut log = TrainLog::default();
    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        model.reseed_dropout(seed::derive(cfg.seed, "dropout", &[epoch as u64]));
        let lr = opt.learning_rate;
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for batch in train_data.epoch(epoch as u64) {
            let batch = batch?;
            // Batch statistics are meaningless for a single record.
            if batch.len() < 2 {
                continue;
            }
            let loss = train_step(model, &mut opt, &batch.x.cast::<R>(), &batch.y.cast::<R>(), cfg)?;
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
        }
        if seen == 0 {
            return Err(Error::Input("every training batch had fewer than two records".into()));
        }
        let (val_preds, val_loss) = predict_set(model, val_data, class_names, cfg.label_smoothing)?;
        let auroc = macro_auroc(&val_preds)?;
        let decision = stopper.observe(epoch, auroc);
        if decision.improved {
            best_state = model.state();
        }
        opt.learning_rate = plateau.observe(val_loss, lr);
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            val_loss,
            val_macro_auroc: auroc,
            lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: train_loss {:.5} val_loss {:.5} val_auroc {:.4} lr {:.2e} ({:.1}s)",
            rec.train_loss,
            rec.val_loss,
            rec.val_macro_auroc,
            rec.lr,
            rec.seconds
        );
        log.epochs.push(rec);
        if decision.stop {
            log.stopped_early = true;
            break;
        }
    }
    let (best_epoch, best_auroc) = stopper.best().unwrap_or((0, f64::NAN));
    model.load_state(&best_state)?;
    log.best_epoch = best_epoch;
    log.best_val_macro_auroc = best_auroc;
    Ok(log)
}

/// Fits standardisation on `train` and builds the two batch generators.
pub fn make_generators(
    train: &TrainSet,
    val: &[RecordMeta],
    source: Arc<dyn SignalSource>,
    cfg: &TrainConfig,
) -> Result<(Arc<StandardizationStats>, BatchGenerator, BatchGenerator)> {
    let stats = Arc::new(fit_standardization(train, source.as_ref())?);
    let train_gen = BatchGenerator::new(train.records().to_vec(), Arc::clone(&source), cfg.batch_size)?
        .with_stats(Arc::clone(&stats))
        .shuffled(cfg.seed)
        .with_mode(Mode::Train)
        .with_augment(cfg.augment)?
        .with_prefetch(cfg.prefetch);
    let val_gen = eval_generator(val, source, &stats, cfg.batch_size, cfg.prefetch)?;
    Ok((stats, train_gen, val_gen))
}

/// In-order, augmentation-free batches for evaluation.
pub fn eval_generator(
    records: &[RecordMeta],
    source: Arc<dyn SignalSource>,
    stats: &Arc<StandardizationStats>,
    batch_size: usize,
    prefetch: usize,
) -> Result<BatchGenerator> {
    Ok(BatchGenerator::new(records.to_vec(), source, batch_size)?
        .with_stats(Arc::clone(stats))
        .with_mode(Mode::Infer)
        .with_prefetch(prefetch))
}
