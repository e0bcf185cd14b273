use std::path::Path;

use serde::{Deserialize, Serialize};

use super::source::SignalSource;
use super::split::TrainSet;
use crate::error::{Error, Result};

/// Per-lead mean and population standard deviation over every sample of the
/// training records. Fields are private: once fitted, the statistics cannot
/// be altered or refitted on other data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    mean: Vec<f64>,
    std: Vec<f64>,
    train_records: usize,
    train_fingerprint: String,
}

impl StandardizationStats {
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn leads(&self) -> usize {
        self.mean.len()
    }

    pub fn train_records(&self) -> usize {
        self.train_records
    }

    pub fn train_fingerprint(&self) -> &str {
        &self.train_fingerprint
    }

    /// In place, `(x − mean) / std` per lead on a `[length × leads]` signal.
    pub fn apply(&self, signal: &mut [f32]) -> Result<()> {
        let leads = self.leads();
        if signal.len() % leads != 0 {
            return Err(Error::dim(format!("{} values do not form rows of {leads} leads", signal.len())));
        }
        for row in signal.chunks_exact_mut(leads) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = ((*v as f64 - m) / s) as f32;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: StandardizationStats = serde_json::from_str(text)?;
        if s.mean.len() != s.std.len() || s.mean.is_empty() {
            return Err(Error::Validation("standardization stats: mean/std length mismatch".into()));
        }
        if let Some((i, v)) = s.std.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Validation(format!("standardization stats: lead {i} std {v} is not positive")));
        }
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Fits global per-lead statistics from the training records only, merging
/// per-record moments in f64 (Chan et al. parallel update).
pub fn fit_standardization(train: &TrainSet, source: &dyn SignalSource) -> Result<StandardizationStats> {
    if train.is_empty() {
        return Err(Error::DegenerateData("cannot standardize on an empty training set".into()));
    }
    let (_, leads) = source.shape();
    let mut count = 0f64;
    let mut mean = vec![0f64; leads];
    let mut m2 = vec![0f64; leads];
    for r in train.records() {
        let signal = source.load(r)?;
        let n = (signal.len() / leads) as f64;
        if n == 0.0 {
            continue;
        }
        for l in 0..leads {
            let vals = signal.iter().skip(l).step_by(leads).map(|&v| v as f64);
            let rm = vals.clone().sum::<f64>() / n;
            let rm2: f64 = vals.map(|v| (v - rm) * (v - rm)).sum();
            let delta = rm - mean[l];
            let total = count + n;
            mean[l] += delta * n / total;
            m2[l] += rm2 + delta * delta * count * n / total;
        }
        count += n;
    }
    let std: Vec<f64> = m2.iter().map(|&v| (v / count).sqrt()).collect();
    if let Some((i, _)) = std.iter().enumerate().find(|(_, s)| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::DegenerateData(format!("lead {i} has zero variance over the training set")));
    }
    Ok(StandardizationStats {
        mean,
        std,
        train_records: train.len(),
        train_fingerprint: train.fingerprint(),
    })
}
