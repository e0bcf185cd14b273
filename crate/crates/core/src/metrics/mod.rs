//! Multi-label evaluation: thresholded confusion metrics, ranking metrics,
//! per-class summaries and threshold search.

pub mod ranking;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use ranking::{auprc, auroc, average_ranks, spearman, Correlation};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Aggregate columns in the order used by the comparison tables.
pub const AGGREGATE_COLUMNS: [&str; 11] = [
    "hamming_loss",
    "macro_auroc",
    "macro_auprc",
    "macro_f1",
    "macro_precision",
    "macro_recall",
    "macro_balanced_accuracy",
    "micro_f1",
    "micro_precision",
    "micro_recall",
    "subset_accuracy",
];

/// Metrics where a lower value is better.
pub fn lower_is_better(metric: &str) -> bool {
    metric == "hamming_loss"
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ThresholdPolicy {
    Fixed(f64),
    PerClass(Vec<f64>),
}

/// Scores and binary labels, `N × K` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    scores: Vec<f64>,
    labels: Vec<u8>,
    n: usize,
    class_names: Vec<String>,
    threshold: ThresholdPolicy,
}

impl PredictionSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>, class_names: Vec<String>) -> Result<Self> {
        let k = class_names.len();
        if k == 0 {
            return Err(Error::Input("no classes".into()));
        }
        if scores.len() != labels.len() || scores.len() % k != 0 {
            return Err(Error::Input(format!(
                "{} scores and {} labels do not form rows of {k} classes",
                scores.len(),
                labels.len()
            )));
        }
        let n = scores.len() / k;
        if n == 0 {
            return Err(Error::Input("empty prediction set".into()));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Input("labels must be 0 or 1".into()));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::Input(format!("non-finite score {s}")));
        }
        Ok(PredictionSet {
            scores,
            labels,
            n,
            class_names,
            threshold: ThresholdPolicy::Fixed(0.5),
        })
    }

    /// From model probabilities and multi-hot targets, both `[N, K]`.
    pub fn from_tensors(probs: &Tensor<f32>, targets: &Tensor<f32>, class_names: Vec<String>) -> Result<Self> {
        if probs.shape() != targets.shape() {
            return Err(Error::Input(format!("scores {:?} vs labels {:?}", probs.shape(), targets.shape())));
        }
        Self::new(
            probs.data().iter().map(|&v| v as f64).collect(),
            targets.data().iter().map(|&v| (v >= 0.5) as u8).collect(),
            class_names,
        )
    }

    pub fn with_threshold(mut self, policy: ThresholdPolicy) -> Result<Self> {
        if let ThresholdPolicy::PerClass(t) = &policy {
            if t.len() != self.classes() {
                return Err(Error::Input(format!("{} thresholds for {} classes", t.len(), self.classes())));
            }
        }
        self.threshold = policy;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn threshold_policy(&self) -> &ThresholdPolicy {
        &self.threshold
    }

    pub fn threshold(&self, class: usize) -> f64 {
        match &self.threshold {
            ThresholdPolicy::Fixed(t) => *t,
            ThresholdPolicy::PerClass(t) => t[class],
        }
    }

    pub fn class_scores(&self, class: usize) -> Vec<f64> {
        self.scores.iter().skip(class).step_by(self.classes()).copied().collect()
    }

    pub fn class_labels(&self, class: usize) -> Vec<u8> {
        self.labels.iter().skip(class).step_by(self.classes()).copied().collect()
    }

    /// `score ≥ threshold` per element.
    pub fn binarized(&self) -> Vec<u8> {
        let k = self.classes();
        self.scores
            .iter()
            .enumerate()
            .map(|(i, &s)| (s >= self.threshold(i % k)) as u8)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Confusion {
    pub fn from_pairs(pred: impl Iterator<Item = (u8, u8)>) -> Self {
        let mut c = Confusion::default();
        for (p, y) in pred {
            match (p != 0, y != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn balanced_accuracy(&self) -> f64 {
        (self.recall() + self.specificity()) / 2.0
    }

    fn add(&mut self, o: &Confusion) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub hamming_loss: f64,
    pub label_accuracy: f64,
    pub subset_accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_balanced_accuracy: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<Confusion>,
    /// Classes with no positives, left out of every macro mean.
    pub skipped_classes: Vec<String>,
}

fn mean_over(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Confusion-based metrics at the prediction set's thresholds. Macro means
/// run over classes that have at least one positive; weighted means use each
/// class's positive count as its weight.
pub fn threshold_metrics(preds: &PredictionSet) -> Result<ThresholdMetrics> {
    let k = preds.classes();
    let n = preds.len();
    let bin = preds.binarized();
    let labels = preds.labels();
    let per_class: Vec<Confusion> = (0..k)
        .map(|c| Confusion::from_pairs((0..n).map(|i| (bin[i * k + c], labels[i * k + c]))))
        .collect();
    let disagreements = bin.iter().zip(labels).filter(|(p, y)| p != y).count();
    let exact = (0..n).filter(|&i| bin[i * k..(i + 1) * k] == labels[i * k..(i + 1) * k]).count();
    let mut pooled = Confusion::default();
    for c in &per_class {
        pooled.add(c);
    }
    let defined: Vec<&Confusion> = per_class.iter().filter(|c| c.positives() > 0).collect();
    let skipped_classes: Vec<String> = per_class
        .iter()
        .zip(preds.class_names())
        .filter(|(c, _)| c.positives() == 0)
        .map(|(_, name)| name.clone())
        .collect();
    let support: usize = per_class.iter().map(Confusion::positives).sum();
    let weighted = |f: fn(&Confusion) -> f64| {
        if support == 0 {
            0.0
        } else {
            per_class.iter().map(|c| f(c) * c.positives() as f64).sum::<f64>() / support as f64
        }
    };
    let hamming_loss = disagreements as f64 / (n * k) as f64;
    Ok(ThresholdMetrics {
        hamming_loss,
        label_accuracy: 1.0 - hamming_loss,
        subset_accuracy: exact as f64 / n as f64,
        macro_precision: mean_over(defined.iter().map(|c| c.precision())),
        macro_recall: mean_over(defined.iter().map(|c| c.recall())),
        macro_f1: mean_over(defined.iter().map(|c| c.f1())),
        macro_balanced_accuracy: mean_over(defined.iter().map(|c| c.balanced_accuracy())),
        micro_precision: pooled.precision(),
        micro_recall: pooled.recall(),
        micro_f1: pooled.f1(),
        weighted_precision: weighted(Confusion::precision),
        weighted_recall: weighted(Confusion::recall),
        weighted_f1: weighted(Confusion::f1),
        per_class,
        skipped_classes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub macro_auroc: f64,
    pub macro_auprc: f64,
    pub per_class_auroc: Vec<Option<f64>>,
    pub per_class_auprc: Vec<Option<f64>>,
    /// Classes whose AUROC (or AUPRC) is undefined on this set.
    pub undefined_classes: Vec<String>,
}

/// Per-class AUROC/AUPRC and their means over classes where they are defined.
pub fn macro_ranking_metrics(preds: &PredictionSet) -> Result<RankingMetrics> {
    let mut per_class_auroc = Vec::with_capacity(preds.classes());
    let mut per_class_auprc = Vec::with_capacity(preds.classes());
    let mut undefined_classes = Vec::new();
    for (c, name) in preds.class_names().iter().enumerate() {
        let (s, y) = (preds.class_scores(c), preds.class_labels(c));
        let defined = |r: Result<f64>| match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::UndefinedMetric(_)) => Ok(None),
            Err(e) => Err(e),
        };
        let a = defined(auroc(&s, &y))?;
        let p = defined(auprc(&s, &y))?;
        if a.is_none() || p.is_none() {
            log::warn!("class {name}: ranking metric undefined, excluded from macro mean");
            undefined_classes.push(name.clone());
        }
        per_class_auroc.push(a);
        per_class_auprc.push(p);
    }
    if per_class_auroc.iter().all(Option::is_none) {
        return Err(Error::UndefinedMetric("AUROC is undefined for every class".into()));
    }
    Ok(RankingMetrics {
        macro_auroc: mean_over(per_class_auroc.iter().flatten().copied()),
        macro_auprc: mean_over(per_class_auprc.iter().flatten().copied()),
        per_class_auroc,
        per_class_auprc,
        undefined_classes,
    })
}

/// Macro AUROC alone, as monitored during training.
pub fn macro_auroc(preds: &PredictionSet) -> Result<f64> {
    macro_ranking_metrics(preds).map(|r| r.macro_auroc)
}

/// One-vs-rest confusion cells normalised by N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRates {
    pub class: String,
    pub tp: f64,
    pub fp: f64,
    pub fn_: f64,
    pub tn: f64,
}

pub fn class_confusion_summary(preds: &PredictionSet) -> Result<Vec<ConfusionRates>> {
    let n = preds.len() as f64;
    let tm = threshold_metrics(preds)?;
    Ok(tm
        .per_class
        .iter()
        .zip(preds.class_names())
        .map(|(c, name)| ConfusionRates {
            class: name.clone(),
            tp: c.tp as f64 / n,
            fp: c.fp as f64 / n,
            fn_: c.fn_ as f64 / n,
            tn: c.tn as f64 / n,
        })
        .collect())
}

/// Spearman correlation between per-class F1 and prevalence.
pub fn prevalence_correlation(per_class_f1: &[f64], per_class_prevalence: &[f64]) -> Result<Correlation> {
    spearman(per_class_f1, per_class_prevalence)
}

/// Per class, the candidate threshold (a distinct score) that maximises F1
/// for `score ≥ threshold`, taking the lowest on ties. Classes without
/// positives, or whose best F1 is zero, fall back to 0.5.
pub fn optimize_thresholds(val: &PredictionSet) -> Vec<f64> {
    (0..val.classes())
        .map(|c| {
            let s = val.class_scores(c);
            let y = val.class_labels(c);
            let pos = y.iter().filter(|&&v| v != 0).count() as u64;
            if pos == 0 {
                log::warn!("class {}: no validation positives, threshold 0.5", val.class_names()[c]);
                return 0.5;
            }
            let mut idx: Vec<usize> = (0..s.len()).collect();
            idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
            // Best F1 = 2tp / (predicted + pos), compared exactly as a fraction.
            let (mut best, mut best_num, mut best_den) = (0.5, 0u64, 1u64);
            let (mut tp, mut predicted) = (0u64, 0u64);
            let mut i = 0;
            while i < idx.len() {
                let t = s[idx[i]];
                while i < idx.len() && s[idx[i]] == t {
                    tp += (y[idx[i]] != 0) as u64;
                    predicted += 1;
                    i += 1;
                }
                let (num, den) = (2 * tp, predicted + pos);
                if num * best_den >= best_num * den && num > 0 {
                    best = t;
                    best_num = num;
                    best_den = den;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: String,
    pub prevalence: f64,
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub balanced_accuracy: f64,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub hamming_loss: f64,
    pub label_accuracy: f64,
    pub subset_accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_balanced_accuracy: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub macro_auroc: f64,
    pub macro_auprc: f64,
    pub spearman_prevalence_f1: Option<Correlation>,
    pub per_class: Vec<ClassRow>,
    /// Classes with no positives in this set.
    pub undefined_classes: Vec<String>,
}

/// The full report for one prediction set.
pub fn evaluate(preds: &PredictionSet) -> Result<MetricsReport> {
    let tm = threshold_metrics(preds)?;
    let rm = macro_ranking_metrics(preds)?;
    let n = preds.len();
    let per_class: Vec<ClassRow> = tm
        .per_class
        .iter()
        .enumerate()
        .map(|(c, conf)| ClassRow {
            class: preds.class_names()[c].clone(),
            prevalence: conf.positives() as f64 / n as f64,
            threshold: preds.threshold(c),
            tp: conf.tp,
            fp: conf.fp,
            fn_: conf.fn_,
            tn: conf.tn,
            precision: conf.precision(),
            recall: conf.recall(),
            specificity: conf.specificity(),
            f1: conf.f1(),
            balanced_accuracy: conf.balanced_accuracy(),
            auroc: rm.per_class_auroc[c],
            auprc: rm.per_class_auprc[c],
        })
        .collect();
    let f1: Vec<f64> = per_class.iter().map(|r| r.f1).collect();
    let prev: Vec<f64> = per_class.iter().map(|r| r.prevalence).collect();
    let spearman_prevalence_f1 = match prevalence_correlation(&f1, &prev) {
        Ok(c) => Some(c),
        Err(Error::UndefinedMetric(_)) | Err(Error::Input(_)) => None,
        Err(e) => return Err(e),
    };
    let mut undefined_classes = tm.skipped_classes.clone();
    for c in rm.undefined_classes {
        if !undefined_classes.contains(&c) {
            undefined_classes.push(c);
        }
    }
    Ok(MetricsReport {
        n,
        hamming_loss: tm.hamming_loss,
        label_accuracy: tm.label_accuracy,
        subset_accuracy: tm.subset_accuracy,
        macro_precision: tm.macro_precision,
        macro_recall: tm.macro_recall,
        macro_f1: tm.macro_f1,
        macro_balanced_accuracy: tm.macro_balanced_accuracy,
        micro_precision: tm.micro_precision,
        micro_recall: tm.micro_recall,
        micro_f1: tm.micro_f1,
        weighted_precision: tm.weighted_precision,
        weighted_recall: tm.weighted_recall,
        weighted_f1: tm.weighted_f1,
        macro_auroc: rm.macro_auroc,
        macro_auprc: rm.macro_auprc,
        spearman_prevalence_f1,
        per_class,
        undefined_classes,
    })
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

impl MetricsReport {
    /// Scalar metric by column name (aggregate columns plus the extras).
    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "hamming_loss" => self.hamming_loss,
            "label_accuracy" => self.label_accuracy,
            "subset_accuracy" => self.subset_accuracy,
            "macro_precision" => self.macro_precision,
            "macro_recall" => self.macro_recall,
            "macro_f1" => self.macro_f1,
            "macro_balanced_accuracy" => self.macro_balanced_accuracy,
            "micro_precision" => self.micro_precision,
            "micro_recall" => self.micro_recall,
            "micro_f1" => self.micro_f1,
            "weighted_precision" => self.weighted_precision,
            "weighted_recall" => self.weighted_recall,
            "weighted_f1" => self.weighted_f1,
            "macro_auroc" => self.macro_auroc,
            "macro_auprc" => self.macro_auprc,
            _ => return None,
        })
    }

    pub fn aggregate_row(&self) -> Vec<f64> {
        AGGREGATE_COLUMNS.iter().map(|c| self.metric(c).unwrap_or(f64::NAN)).collect()
    }

    pub fn class(&self, name: &str) -> Option<&ClassRow> {
        self.per_class.iter().find(|r| r.class == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// One header row and one value row, columns in [`AGGREGATE_COLUMNS`] order.
    pub fn write_aggregate_csv(&self, path: &Path, model: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut header = vec!["model"];
        header.extend(AGGREGATE_COLUMNS);
        w.write_record(&header)?;
        let mut row = vec![model.to_string()];
        row.extend(self.aggregate_row().iter().map(|v| format!("{v:.6}")));
        w.write_record(&row)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_per_class_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record([
            "class", "prevalence", "threshold", "tp", "fp", "fn", "tn", "tp_rate", "fp_rate", "fn_rate", "tn_rate",
            "precision", "recall", "specificity", "f1", "balanced_accuracy", "auroc", "auprc",
        ])?;
        let n = self.n as f64;
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        for r in &self.per_class {
            w.write_record([
                r.class.clone(),
                format!("{:.6}", r.prevalence),
                format!("{:.6}", r.threshold),
                r.tp.to_string(),
                r.fp.to_string(),
                r.fn_.to_string(),
                r.tn.to_string(),
                format!("{:.6}", r.tp as f64 / n),
                format!("{:.6}", r.fp as f64 / n),
                format!("{:.6}", r.fn_ as f64 / n),
                format!("{:.6}", r.tn as f64 / n),
                format!("{:.6}", r.precision),
                format!("{:.6}", r.recall),
                format!("{:.6}", r.specificity),
                format!("{:.6}", r.f1),
                format!("{:.6}", r.balanced_accuracy),
                opt(r.auroc),
                opt(r.auprc),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
