//! Lazy, memory-bounded mini-batch iteration with optional background prefetch.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;

use rand::seq::SliceRandom;

use super::augment::{augment, record_rng, AugmentConfig};
use super::corpus::RecordMeta;
use super::source::SignalSource;
use super::standardize::StandardizationStats;
use crate::error::{Error, Result};
use crate::kernels::Mode;
use crate::tensor::Tensor;

/// Tracks bytes held by live batches (including ones queued or being built).
#[derive(Debug, Default)]
pub struct MemoryMeter {
    current: AtomicUsize,
    peak: AtomicUsize,
}

impl MemoryMeter {
    pub fn current(&self) -> usize {
        self.current.load(Ordering::SeqCst)
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn reset_peak(&self) {
        self.peak.store(self.current(), Ordering::SeqCst);
    }

    fn acquire(self: &Arc<Self>, bytes: usize) -> MemoryGuard {
        let now = self.current.fetch_add(bytes, Ordering::SeqCst) + bytes;
        self.peak.fetch_max(now, Ordering::SeqCst);
        MemoryGuard {
            meter: Arc::clone(self),
            bytes,
        }
    }
}

#[derive(Debug)]
struct MemoryGuard {
    meter: Arc<MemoryMeter>,
    bytes: usize,
}

impl Drop for MemoryGuard {
    fn drop(&mut self) {
        self.meter.current.fetch_sub(self.bytes, Ordering::SeqCst);
    }
}

#[derive(Debug)]
pub struct Batch {
    pub ids: Vec<u32>,
    /// `[B, length, leads]`
    pub x: Tensor<f32>,
    /// `[B, classes]` multi-hot targets.
    pub y: Tensor<f32>,
    _guard: MemoryGuard,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

struct Plan {
    records: Arc<Vec<RecordMeta>>,
    source: Arc<dyn SignalSource>,
    stats: Option<Arc<StandardizationStats>>,
    augment: Option<AugmentConfig>,
    mode: Mode,
    seed: u64,
    classes: usize,
    meter: Arc<MemoryMeter>,
}

impl Plan {
    fn build(&self, epoch: u64, idx: &[usize]) -> Result<Batch> {
        let (t, l) = self.source.shape();
        let b = idx.len();
        let guard = self.meter.acquire((b * t * l + b * self.classes) * std::mem::size_of::<f32>());
        let mut x = Vec::with_capacity(b * t * l);
        let mut y = Vec::with_capacity(b * self.classes);
        let mut ids = Vec::with_capacity(b);
        for &i in idx {
            let r = &self.records[i];
            let mut s = self.source.load(r)?;
            if s.len() != t * l {
                return Err(Error::Record {
                    ecg_id: r.ecg_id,
                    source: Box::new(Error::dim(format!("signal has {} values, expected {}", s.len(), t * l))),
                });
            }
            if let Some(stats) = &self.stats {
                stats.apply(&mut s)?;
            }
            if let Some(cfg) = &self.augment {
                augment(&mut s, cfg, &mut record_rng(self.seed, epoch, r.ecg_id), self.mode)?;
            }
            x.extend_from_slice(&s);
            y.extend(r.labels.iter().map(|&v| v as f32));
            ids.push(r.ecg_id);
        }
        Ok(Batch {
            ids,
            x: Tensor::from_vec(&[b, t, l], x)?,
            y: Tensor::from_vec(&[b, self.classes], y)?,
            _guard: guard,
        })
    }
}

/// Yields `[B, length, leads]` batches over a fixed record list. Signals are
/// read from the source only when their batch is built.
pub struct BatchGenerator {
    plan: Arc<Plan>,
    batch_size: usize,
    shuffle: bool,
    prefetch: usize,
}

impl BatchGenerator {
    pub fn new(records: Vec<RecordMeta>, source: Arc<dyn SignalSource>, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        let classes = records.first().map_or(0, |r| r.labels.len());
        if let Some(r) = records.iter().find(|r| r.labels.len() != classes) {
            return Err(Error::Data(format!(
                "record {} has {} labels, expected {classes}",
                r.ecg_id,
                r.labels.len()
            )));
        }
        Ok(BatchGenerator {
            plan: Arc::new(Plan {
                records: Arc::new(records),
                source,
                stats: None,
                augment: None,
                mode: Mode::Infer,
                seed: 0,
                classes,
                meter: Arc::new(MemoryMeter::default()),
            }),
            batch_size,
            shuffle: false,
            prefetch: 0,
        })
    }

    fn plan_mut(&mut self) -> &mut Plan {
        Arc::get_mut(&mut self.plan).expect("generator configured while an epoch is running")
    }

    pub fn with_stats(mut self, stats: Arc<StandardizationStats>) -> Self {
        self.plan_mut().stats = Some(stats);
        self
    }

    /// Shuffles each epoch with a permutation fixed by `(seed, epoch)`.
    pub fn shuffled(mut self, seed: u64) -> Self {
        self.shuffle = true;
        self.plan_mut().seed = seed;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.plan_mut().seed = seed;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.plan_mut().mode = mode;
        self
    }

    /// Augmentation only takes effect in train mode.
    pub fn with_augment(mut self, cfg: AugmentConfig) -> Result<Self> {
        cfg.validate()?;
        self.plan_mut().augment = Some(cfg);
        Ok(self)
    }

    /// Builds up to `depth` batches ahead on a background thread.
    pub fn with_prefetch(mut self, depth: usize) -> Self {
        self.prefetch = depth;
        self
    }

    pub fn len(&self) -> usize {
        self.plan.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plan.records.is_empty()
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn num_batches(&self) -> usize {
        self.len().div_ceil(self.batch_size)
    }

    pub fn records(&self) -> &[RecordMeta] {
        &self.plan.records
    }

    pub fn meter(&self) -> &MemoryMeter {
        &self.plan.meter
    }

    /// Bytes occupied by one full batch.
    pub fn batch_bytes(&self) -> usize {
        let (t, l) = self.plan.source.shape();
        self.batch_size * (t * l + self.plan.classes) * std::mem::size_of::<f32>()
    }

    /// Record order for `epoch`.
    pub fn order(&self, epoch: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        if self.shuffle {
            order.shuffle(&mut crate::seed::rng(self.plan.seed, "shuffle", &[epoch]));
        }
        order
    }

    pub fn epoch(&self, epoch: u64) -> EpochIter {
        let order = self.order(epoch);
        let chunks: Vec<Vec<usize>> = order.chunks(self.batch_size).map(<[usize]>::to_vec).collect();
        if self.prefetch == 0 {
            return EpochIter(Inner::Inline {
                plan: Arc::clone(&self.plan),
                epoch,
                chunks: chunks.into_iter(),
            });
        }
        let (tx, rx) = sync_channel(self.prefetch);
        let plan = Arc::clone(&self.plan);
        let worker = std::thread::spawn(move || {
            for c in chunks {
                let b = plan.build(epoch, &c);
                let stop = b.is_err();
                if tx.send(b).is_err() || stop {
                    break;
                }
            }
        });
        EpochIter(Inner::Prefetch {
            rx: Some(rx),
            worker: Some(worker),
        })
    }
}

/// Iterator over one epoch's batches.
pub struct EpochIter(Inner);

enum Inner {
    Inline {
        plan: Arc<Plan>,
        epoch: u64,
        chunks: std::vec::IntoIter<Vec<usize>>,
    },
    Prefetch {
        rx: Option<Receiver<Result<Batch>>>,
        worker: Option<JoinHandle<()>>,
    },
}

impl Iterator for EpochIter {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Result<Batch>> {
        match &mut self.0 {
            Inner::Inline { plan, epoch, chunks } => chunks.next().map(|c| plan.build(*epoch, &c)),
            Inner::Prefetch { rx, .. } => rx.as_ref()?.recv().ok(),
        }
    }
}

impl Drop for EpochIter {
    fn drop(&mut self) {
        if let Inner::Prefetch { rx, worker } = &mut self.0 {
            drop(rx.take());
            if let Some(w) = worker.take() {
                let _ = w.join();
            }
        }
    }
}
