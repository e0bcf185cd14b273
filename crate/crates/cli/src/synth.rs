//! Synthetic corpus in the PTB-XL on-disk layout, for desk-scale runs.
//!
//! Each class owns a template: a sinusoid at a class-specific frequency plus a
//! Gaussian transient at a class-specific offset, mixed into the leads with
//! class-specific weights. A record carrying several labels is the sum of
//! their templates on top of a shared baseline rhythm and white noise.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ecgnet_core::data::{ptbxl_header, write_record, DATABASE_CSV, DIAGNOSTIC_SUBCLASSES, STATEMENTS_CSV};
use ecgnet_core::seed;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::exit::config_error;

pub const SAMPLES: usize = 1000;
pub const LEADS: usize = 12;
const SAMPLING_HZ: f64 = 100.0;
const GAIN: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_records: usize,
    pub n_classes: usize,
    pub seed: u64,
    /// Standard deviation of the additive white noise, in mV.
    pub noise: f64,
    /// Independent per-class label probability.
    pub label_probability: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_records: 1000,
            n_classes: 3,
            seed: 0,
            noise: 0.15,
            label_probability: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthManifest {
    pub root: PathBuf,
    pub config: SynthConfig,
    pub classes: Vec<String>,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let limit = DIAGNOSTIC_SUBCLASSES.len();
        if !(1..=limit).contains(&self.n_classes) {
            return Err(config_error(format!("synthetic n_classes must lie in 1..={limit}")));
        }
        if self.n_records < 10 {
            return Err(config_error("synthetic corpus needs at least one record per fold"));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(config_error("synthetic noise must be a non-negative number"));
        }
        if !(0.0..=1.0).contains(&self.label_probability) {
            return Err(config_error("synthetic label probability must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Oscillation frequency (Hz) of class `k`; the highest stays below Nyquist.
pub fn class_frequency(k: usize) -> f64 {
    2.0 + 1.8 * k as f64
}

/// Centre sample of class `k`'s transient.
pub fn class_offset(k: usize) -> f64 {
    60.0 + 38.0 * k as f64
}

fn lead_weight(k: usize, lead: usize) -> f64 {
    0.6 + 0.4 * ((lead + 3 * k) as f64).cos()
}

/// Labels and waveform (frame-major, mV) of record `ecg_id`.
pub fn synth_record(cfg: &SynthConfig, ecg_id: u32) -> (Vec<u8>, Vec<f64>) {
    let mut rng = seed::rng(cfg.seed, "synthetic", &[ecg_id as u64]);
    let mut labels: Vec<u8> = (0..cfg.n_classes).map(|_| rng.random_bool(cfg.label_probability) as u8).collect();
    if labels.iter().all(|&v| v == 0) {
        labels[rng.random_range(0..cfg.n_classes)] = 1;
    }
    let noise = Normal::new(0.0, cfg.noise).expect("noise std validated");
    let rhythm_phase = rng.random_range(0.0..2.0 * PI);
    let active: Vec<(usize, f64, f64)> = labels
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == 1)
        .map(|(k, _)| (k, rng.random_range(0.0..2.0 * PI), class_offset(k) + rng.random_range(-15.0..15.0)))
        .collect();
    let mut signal = vec![0.0; SAMPLES * LEADS];
    for t in 0..SAMPLES {
        let secs = t as f64 / SAMPLING_HZ;
        let rhythm = 0.1 * (2.0 * PI * 1.1 * secs + rhythm_phase).sin();
        let mut class_part = [0.0; LEADS];
        for &(k, phase, centre) in &active {
            let wave = 0.4 * (2.0 * PI * class_frequency(k) * secs + phase).sin();
            let bump = (-((t as f64 - centre) / 6.0).powi(2) / 2.0).exp();
            for (lead, v) in class_part.iter_mut().enumerate() {
                *v += lead_weight(k, lead) * (wave + bump);
            }
        }
        for lead in 0..LEADS {
            signal[t * LEADS + lead] = rhythm + class_part[lead] + noise.sample(&mut rng);
        }
    }
    (labels, signal)
}

/// Digital samples exactly as written to disk.
pub fn quantize(signal: &[f64]) -> Vec<i16> {
    signal.iter().map(|v| (v * GAIN).round().clamp(-32767.0, 32767.0) as i16).collect()
}

/// Relative record path without extension, as listed in `filename_lr`.
pub fn record_path(ecg_id: u32) -> String {
    format!("records100/{:05}/{:05}_lr", ecg_id / 1000 * 1000, ecg_id)
}

/// Writes `cfg.n_records` records plus both index CSVs under `root`.
/// Folds are assigned round-robin, every record is its own patient.
pub fn make_synthetic(root: &Path, cfg: &SynthConfig) -> Result<SynthManifest> {
    cfg.validate()?;
    let classes: Vec<String> = DIAGNOSTIC_SUBCLASSES[..cfg.n_classes].iter().map(|s| s.to_string()).collect();
    std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;

    let mut st = String::from(",description,diagnostic,form,rhythm,diagnostic_class,diagnostic_subclass\n");
    for (k, c) in classes.iter().enumerate() {
        st.push_str(&format!("{c},synthetic class {k},1.0,,,{c},{c}\n"));
    }
    st.push_str("SR,sinus rhythm,,,1.0,,\n");
    std::fs::write(root.join(STATEMENTS_CSV), st).context("writing statements table")?;

    let db_path = root.join(DATABASE_CSV);
    let mut db = csv::Writer::from_path(&db_path).with_context(|| format!("creating {}", db_path.display()))?;
    db.write_record(["ecg_id", "patient_id", "scp_codes", "strat_fold", "filename_lr"])?;
    for i in 0..cfg.n_records {
        let ecg_id = i as u32 + 1;
        let (labels, signal) = synth_record(cfg, ecg_id);
        let rel = record_path(ecg_id);
        let name = rel.rsplit('/').next().unwrap_or(&rel);
        write_record(&root.join(&rel), &ptbxl_header(name, SAMPLES, GAIN), &quantize(&signal))?;
        let codes: Vec<String> = classes
            .iter()
            .zip(&labels)
            .filter(|(_, &v)| v == 1)
            .map(|(c, _)| format!("'{c}': 100.0"))
            .chain(std::iter::once("'SR': 0.0".to_string()))
            .collect();
        db.write_record([
            ecg_id.to_string(),
            format!("{ecg_id}.0"),
            format!("{{{}}}", codes.join(", ")),
            (i % 10 + 1).to_string(),
            rel,
        ])?;
    }
    db.flush()?;
    let manifest = SynthManifest {
        root: root.to_path_buf(),
        config: cfg.clone(),
        classes,
    };
    let mut f = std::fs::File::create(root.join("synthetic.json"))?;
    f.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest)
}
