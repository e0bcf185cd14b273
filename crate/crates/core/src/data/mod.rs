//! PTB-XL ingestion: WFDB records, SCP label mapping, fold splits,
//! standardisation, augmentation and batching.

pub mod augment;
pub mod batch;
pub mod corpus;
pub mod labels;
pub mod source;
pub mod split;
pub mod standardize;
pub mod wfdb;

pub use augment::{augment, record_rng, AugmentConfig};
pub use batch::{Batch, BatchGenerator, EpochIter, MemoryMeter};
pub use corpus::{summarize, write_label_matrix, write_prevalence_table, ClassCount, Corpus, CorpusSummary, RecordMeta, DATABASE_CSV, STATEMENTS_CSV};
pub use labels::{map_labels, parse_scp_codes, LabelSpace, Statement, StatementTable, DIAGNOSTIC_SUBCLASSES};
pub use source::{MemorySource, SignalSource, WfdbSource};
pub use split::{check_patient_disjoint, fingerprint_ids, partition_folds, sha256_hex, split_by_fold, Split, TrainSet, TEST_FOLD, TRAIN_FOLDS, VAL_FOLD};
pub use standardize::{fit_standardization, StandardizationStats};
pub use wfdb::{parse_wfdb_header, parse_wfdb_signal, ptbxl_header, read_record, write_record, WfdbHeader};
