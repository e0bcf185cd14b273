use std::collections::HashMap;
use std::path::PathBuf;

use super::corpus::RecordMeta;
use super::wfdb::read_record;
use crate::error::{Error, Result};

/// Supplies raw (unstandardised) signals, `[length × leads]` row-major.
pub trait SignalSource: Send + Sync {
    fn load(&self, record: &RecordMeta) -> Result<Vec<f32>>;

    /// `(length, leads)` of every signal this source returns.
    fn shape(&self) -> (usize, usize);
}

/// Reads WFDB records from disk on every call.
#[derive(Debug, Clone)]
pub struct WfdbSource {
    root: PathBuf,
    length: usize,
    leads: usize,
}

impl WfdbSource {
    pub fn new(root: impl Into<PathBuf>, length: usize, leads: usize) -> Self {
        WfdbSource {
            root: root.into(),
            length,
            leads,
        }
    }

    /// PTB-XL low-resolution records: 1000 samples × 12 leads.
    pub fn ptbxl(root: impl Into<PathBuf>) -> Self {
        Self::new(root, 1000, 12)
    }
}

impl SignalSource for WfdbSource {
    fn load(&self, record: &RecordMeta) -> Result<Vec<f32>> {
        let wrap = |e: Error| Error::Record {
            ecg_id: record.ecg_id,
            source: Box::new(e),
        };
        let (header, signal) = read_record(&self.root.join(&record.filename)).map_err(wrap)?;
        if header.n_samples != self.length || header.n_signals != self.leads {
            return Err(wrap(Error::Validation(format!(
                "expected {}×{} signal, header declares {}×{}",
                self.length, self.leads, header.n_samples, header.n_signals
            ))));
        }
        Ok(signal)
    }

    fn shape(&self) -> (usize, usize) {
        (self.length, self.leads)
    }
}

/// Signals held in memory, keyed by ecg id.
#[derive(Debug, Clone)]
pub struct MemorySource {
    signals: HashMap<u32, Vec<f32>>,
    length: usize,
    leads: usize,
}

impl MemorySource {
    pub fn new(length: usize, leads: usize) -> Self {
        MemorySource {
            signals: HashMap::new(),
            length,
            leads,
        }
    }

    pub fn insert(&mut self, ecg_id: u32, signal: Vec<f32>) -> Result<()> {
        if signal.len() != self.length * self.leads {
            return Err(Error::dim(format!(
                "record {ecg_id}: {} values for a {}×{} signal",
                signal.len(),
                self.length,
                self.leads
            )));
        }
        self.signals.insert(ecg_id, signal);
        Ok(())
    }

    /// Loads every record from another source once.
    pub fn preload(source: &dyn SignalSource, records: &[RecordMeta]) -> Result<Self> {
        let (length, leads) = source.shape();
        let mut m = MemorySource::new(length, leads);
        for r in records {
            m.insert(r.ecg_id, source.load(r)?)?;
        }
        Ok(m)
    }
}

impl SignalSource for MemorySource {
    fn load(&self, record: &RecordMeta) -> Result<Vec<f32>> {
        self.signals.get(&record.ecg_id).cloned().ok_or_else(|| Error::Record {
            ecg_id: record.ecg_id,
            source: Box::new(Error::Data("signal not present in memory source".into())),
        })
    }

    fn shape(&self) -> (usize, usize) {
        (self.length, self.leads)
    }
}
