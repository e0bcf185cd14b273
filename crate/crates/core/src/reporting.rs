//! Cross-model comparison tables and regression checks against published
//! reference values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{lower_is_better, MetricsReport, AGGREGATE_COLUMNS};

const BUNDLED_ANCHORS: &str = include_str!("../data/published_anchors.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorValue {
    pub value: f64,
    /// The digits exactly as published.
    pub printed: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAnchors {
    pub model: String,
    pub metrics: BTreeMap<String, AnchorValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAnchor {
    pub threshold: f64,
    pub classes: Vec<String>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationAnchor {
    pub value: f64,
    pub printed: String,
    pub p_value_below: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassAnchors {
    pub mean_auroc: AnchorValue,
    pub auroc_above: ThresholdAnchor,
    pub class_auroc: BTreeMap<String, AnchorValue>,
    pub spearman_prevalence_f1: CorrelationAnchor,
}

/// Published reference values, versioned and stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedAnchors {
    pub version: u32,
    pub description: String,
    pub columns: Vec<String>,
    pub models: Vec<ModelAnchors>,
    pub per_class: PerClassAnchors,
}

impl PublishedAnchors {
    /// The anchors compiled into the library.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_ANCHORS).expect("bundled anchors file is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: PublishedAnchors = serde_json::from_str(text)?;
        for m in &a.models {
            if let Some(c) = a.columns.iter().find(|c| !m.metrics.contains_key(*c)) {
                return Err(Error::Validation(format!("anchors for {} lack column {c}", m.model)));
            }
        }
        Ok(a)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn model(&self, name: &str) -> Result<&ModelAnchors> {
        self.models
            .iter()
            .find(|m| m.model == name)
            .ok_or_else(|| Error::Input(format!("no published values for model {name:?}")))
    }

    pub fn value(&self, model: &str, metric: &str) -> Result<f64> {
        self.model(model)?
            .metrics
            .get(metric)
            .map(|a| a.value)
            .ok_or_else(|| Error::Input(format!("no published {metric} for {model}")))
    }

    /// Every published model as comparison input.
    pub fn as_scores(&self) -> Vec<ModelScores> {
        self.models
            .iter()
            .map(|m| ModelScores {
                model: m.model.clone(),
                metrics: m.metrics.iter().map(|(k, v)| (k.clone(), v.value)).collect(),
                classes: None,
            })
            .collect()
    }
}

/// Aggregate metrics of one model, optionally with its class space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub model: String,
    pub metrics: BTreeMap<String, f64>,
    pub classes: Option<Vec<String>>,
}

impl ModelScores {
    pub fn from_report(model: &str, report: &MetricsReport) -> Self {
        ModelScores {
            model: model.to_string(),
            metrics: AGGREGATE_COLUMNS
                .iter()
                .filter_map(|c| report.metric(c).map(|v| (c.to_string(), v)))
                .collect(),
            classes: Some(report.per_class.iter().map(|r| r.class.clone()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metrics: Vec<String>,
    /// Sorted by name, so the table does not depend on input order.
    pub models: Vec<String>,
    /// `values[model][metric]`
    pub values: Vec<Vec<f64>>,
    /// Competition ranks (1 = best; ties share the better rank).
    pub ranks: Vec<Vec<usize>>,
    /// Models holding rank 1 for each metric.
    pub best: BTreeMap<String, Vec<String>>,
    /// Number of metrics on which each model holds rank 1.
    pub wins: BTreeMap<String, usize>,
}

/// Ranks models on every aggregate metric (lower is better only for Hamming loss).
pub fn compare_reports(entries: &[ModelScores]) -> Result<Comparison> {
    if entries.len() < 2 {
        return Err(Error::Input("comparison needs at least two models".into()));
    }
    let spaces: Vec<&Vec<String>> = entries.iter().filter_map(|e| e.classes.as_ref()).collect();
    if spaces.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Input("reports use different class spaces".into()));
    }
    let mut sorted: Vec<&ModelScores> = entries.iter().collect();
    sorted.sort_by(|a, b| a.model.cmp(&b.model));
    if let Some(w) = sorted.windows(2).find(|w| w[0].model == w[1].model) {
        return Err(Error::Input(format!("model {:?} listed twice", w[0].model)));
    }
    let metrics: Vec<String> = AGGREGATE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut values = Vec::new();
    for e in &sorted {
        let row = metrics
            .iter()
            .map(|m| {
                e.metrics
                    .get(m)
                    .copied()
                    .ok_or_else(|| Error::Input(format!("model {} lacks {m}", e.model)))
            })
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    let n = sorted.len();
    let mut ranks = vec![vec![0usize; metrics.len()]; n];
    let mut best = BTreeMap::new();
    let mut wins: BTreeMap<String, usize> = sorted.iter().map(|e| (e.model.clone(), 0)).collect();
    for (j, m) in metrics.iter().enumerate() {
        let better = |a: f64, b: f64| if lower_is_better(m) { a < b } else { a > b };
        let mut leaders = Vec::new();
        for i in 0..n {
            ranks[i][j] = 1 + (0..n).filter(|&o| better(values[o][j], values[i][j])).count();
            if ranks[i][j] == 1 {
                leaders.push(sorted[i].model.clone());
                *wins.get_mut(&sorted[i].model).expect("model present") += 1;
            }
        }
        best.insert(m.clone(), leaders);
    }
    Ok(Comparison {
        metrics,
        models: sorted.iter().map(|e| e.model.clone()).collect(),
        values,
        ranks,
        best,
        wins,
    })
}

impl Comparison {
    pub fn rank(&self, model: &str, metric: &str) -> Option<usize> {
        let i = self.models.iter().position(|m| m == model)?;
        let j = self.metrics.iter().position(|m| m == metric)?;
        Some(self.ranks[i][j])
    }

    /// `model, <metric values…>, <metric ranks…>, wins`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let mut header = vec!["model".to_string()];
        header.extend(self.metrics.iter().cloned());
        header.extend(self.metrics.iter().map(|m| format!("{m}_rank")));
        header.push("wins".into());
        w.write_record(&header)?;
        for (i, m) in self.models.iter().enumerate() {
            let mut row = vec![m.clone()];
            row.extend(self.values[i].iter().map(|v| format!("{v:.6}")));
            row.extend(self.ranks[i].iter().map(|r| r.to_string()));
            row.push(self.wins[m].to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    /// Absolute tolerance applied to every metric without an override.
    pub tolerance: f64,
    pub per_metric: BTreeMap<String, f64>,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            tolerance: 0.02,
            per_metric: BTreeMap::new(),
        }
    }
}

impl RegressionConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        RegressionConfig {
            tolerance,
            ..Default::default()
        }
    }

    pub fn tolerance_for(&self, metric: &str) -> f64 {
        self.per_metric.get(metric).copied().unwrap_or(self.tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub metric: String,
    pub anchor: f64,
    pub observed: f64,
    /// `observed − anchor`
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTable {
    pub model: String,
    pub rows: Vec<Deviation>,
}

impl RegressionTable {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&Deviation> {
        self.rows.iter().filter(|r| !r.passed).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        w.write_record(["model", "metric", "anchor", "observed", "deviation", "tolerance", "passed"])?;
        for r in &self.rows {
            w.write_record([
                self.model.clone(),
                r.metric.clone(),
                format!("{}", r.anchor),
                format!("{:.6}", r.observed),
                format!("{:+.6}", r.deviation),
                format!("{}", r.tolerance),
                r.passed.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Signed deviation of each aggregate metric from the published value for
/// `model`. Meant for long full-corpus runs, not for the test suite.
pub fn regression_against_anchors(
    observed: &BTreeMap<String, f64>,
    anchors: &PublishedAnchors,
    model: &str,
    cfg: &RegressionConfig,
) -> Result<RegressionTable> {
    let published = anchors.model(model)?;
    let rows = anchors
        .columns
        .iter()
        .map(|m| {
            let anchor = published.metrics[m].value;
            let obs = *observed
                .get(m)
                .ok_or_else(|| Error::Input(format!("observed metrics lack {m}")))?;
            let tolerance = cfg.tolerance_for(m);
            let deviation = obs - anchor;
            Ok(Deviation {
                metric: m.clone(),
                anchor,
                observed: obs,
                deviation,
                tolerance,
                // Rounded so a deviation of exactly the tolerance is not lost to float noise.
                passed: (deviation.abs() * 1e9).round() <= (tolerance * 1e9).round(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegressionTable {
        model: model.to_string(),
        rows,
    })
}

/// [`regression_against_anchors`] on a full report.
pub fn regression_for_report(
    report: &MetricsReport,
    anchors: &PublishedAnchors,
    model: &str,
    cfg: &RegressionConfig,
) -> Result<RegressionTable> {
    regression_against_anchors(&ModelScores::from_report(model, report).metrics, anchors, model, cfg)
}

/// Checks the per-class reference points: mean AUROC, the named class
/// AUROCs, the classes expected above the AUROC threshold and the
/// prevalence–F1 correlation.
pub fn per_class_regression(report: &MetricsReport, anchors: &PublishedAnchors, cfg: &RegressionConfig) -> RegressionTable {
    let pc = &anchors.per_class;
    let mut rows = Vec::new();
    let mut push = |metric: String, anchor: f64, observed: Option<f64>, tolerance: f64| {
        let observed = observed.unwrap_or(f64::NAN);
        let deviation = observed - anchor;
        rows.push(Deviation {
            metric,
            anchor,
            observed,
            deviation,
            tolerance,
            passed: deviation.abs() <= tolerance,
        });
    };
    let aurocs: Vec<f64> = report.per_class.iter().filter_map(|r| r.auroc).collect();
    let mean = (!aurocs.is_empty()).then(|| aurocs.iter().sum::<f64>() / aurocs.len() as f64);
    push("mean_class_auroc".into(), pc.mean_auroc.value, mean, cfg.tolerance_for("mean_class_auroc"));
    for (class, a) in &pc.class_auroc {
        let key = format!("auroc[{class}]");
        let tol = cfg.tolerance_for(&key);
        push(key, a.value, report.class(class).and_then(|r| r.auroc), tol);
    }
    let rho = report.spearman_prevalence_f1.map(|c| c.rho);
    push("spearman_prevalence_f1".into(), pc.spearman_prevalence_f1.value, rho, cfg.tolerance_for("spearman_prevalence_f1"));
    for class in &pc.auroc_above.classes {
        let observed = report.class(class).and_then(|r| r.auroc).unwrap_or(f64::NAN);
        rows.push(Deviation {
            metric: format!("auroc[{class}] > {}", pc.auroc_above.threshold),
            anchor: pc.auroc_above.threshold,
            observed,
            deviation: observed - pc.auroc_above.threshold,
            tolerance: 0.0,
            passed: observed > pc.auroc_above.threshold,
        });
    }
    RegressionTable {
        model: "per-class".into(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_anchors_parse() {
        let a = PublishedAnchors::bundled();
        assert_eq!(a.models.len(), 6);
        assert_eq!(a.columns, AGGREGATE_COLUMNS);
        assert_eq!(a.value("BiLSTM", "hamming_loss").unwrap(), 0.0338);
        assert_eq!(a.value("BiLSTM", "macro_auroc").unwrap(), 0.9202);
        assert!(matches!(a.model("Transformer"), Err(Error::Input(_))));
    }

    #[test]
    fn identical_inputs_tie_everywhere() {
        let s = PublishedAnchors::bundled().as_scores();
        let twin = ModelScores { model: "twin".into(), ..s[0].clone() };
        let c = compare_reports(&[s[0].clone(), twin]).unwrap();
        assert!(c.ranks.iter().flatten().all(|&r| r == 1));
    }

    #[test]
    fn hand_ordering() {
        let mk = |name: &str, v: f64| ModelScores {
            model: name.into(),
            metrics: AGGREGATE_COLUMNS.iter().map(|c| (c.to_string(), v)).collect(),
            classes: None,
        };
        let c = compare_reports(&[mk("b", 0.2), mk("a", 0.1), mk("c", 0.3)]).unwrap();
        assert_eq!(c.rank("c", "macro_f1"), Some(1));
        assert_eq!(c.rank("a", "macro_f1"), Some(3));
        // Lower Hamming loss wins.
        assert_eq!(c.rank("a", "hamming_loss"), Some(1));
        assert_eq!(c.rank("c", "hamming_loss"), Some(3));
    }
}
