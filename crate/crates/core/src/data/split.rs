//! Official fold partitioning with verified patient disjointness.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::corpus::RecordMeta;
use crate::error::{Error, Result};

pub const TRAIN_FOLDS: [u8; 8] = [1, 2, 3, 4, 5, 6, 7, 8];
pub const VAL_FOLD: u8 = 9;
pub const TEST_FOLD: u8 = 10;

/// Records that may be used to fit anything (standardisation, weights).
/// Only fold partitioning can construct one, so validation or test records
/// cannot reach a fitting routine by accident.
///
/// ```compile_fail
/// let leaked = ecgnet_core::data::TrainSet(Vec::new());
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainSet(Vec<RecordMeta>);

impl TrainSet {
    pub fn records(&self) -> &[RecordMeta] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// SHA-256 over the sorted ecg ids, hex encoded.
    pub fn fingerprint(&self) -> String {
        fingerprint_ids(self.0.iter().map(|r| r.ecg_id))
    }
}

pub fn fingerprint_ids(ids: impl Iterator<Item = u32>) -> String {
    let mut ids: Vec<u32> = ids.collect();
    ids.sort_unstable();
    let mut h = Sha256::new();
    for id in ids {
        h.update(id.to_le_bytes());
    }
    hex(&h.finalize())
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: TrainSet,
    pub val: Vec<RecordMeta>,
    pub test: Vec<RecordMeta>,
}

/// Fails if any patient appears in more than one of `parts`.
pub fn check_patient_disjoint(parts: &[(&str, &[RecordMeta])]) -> Result<()> {
    let mut owner: HashMap<u64, &str> = HashMap::new();
    for (name, recs) in parts {
        for r in recs.iter() {
            match owner.insert(r.patient_id, name) {
                Some(prev) if prev != *name => {
                    return Err(Error::Integrity(format!(
                        "patient {} appears in both {prev} and {name} (ecg_id {})",
                        r.patient_id, r.ecg_id
                    )))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

/// Partitions records by fold membership. Records whose fold is in neither
/// list are left out.
pub fn partition_folds(records: &[RecordMeta], train_folds: &[u8], val_folds: &[u8]) -> Result<(TrainSet, Vec<RecordMeta>)> {
    if let Some(f) = train_folds.iter().find(|f| val_folds.contains(f)) {
        return Err(Error::Integrity(format!("fold {f} requested for both training and validation")));
    }
    let train: Vec<RecordMeta> = records.iter().filter(|r| train_folds.contains(&r.fold)).cloned().collect();
    let val: Vec<RecordMeta> = records.iter().filter(|r| val_folds.contains(&r.fold)).cloned().collect();
    check_patient_disjoint(&[("train", &train), ("validation", &val)])?;
    Ok((TrainSet(train), val))
}

/// Folds 1–8 train, 9 validation, 10 test.
pub fn split_by_fold(records: &[RecordMeta]) -> Result<Split> {
    if let Some(r) = records.iter().find(|r| !(1..=10).contains(&r.fold)) {
        return Err(Error::Data(format!("record {} has fold {} outside 1..=10", r.ecg_id, r.fold)));
    }
    let pick = |f: &dyn Fn(u8) -> bool| records.iter().filter(|r| f(r.fold)).cloned().collect::<Vec<_>>();
    let train = pick(&|f| TRAIN_FOLDS.contains(&f));
    let val = pick(&|f| f == VAL_FOLD);
    let test = pick(&|f| f == TEST_FOLD);
    check_patient_disjoint(&[("train", &train), ("validation", &val), ("test", &test)])?;
    Ok(Split {
        train: TrainSet(train),
        val,
        test,
    })
}
