//! Hybrid CNN–RNN engine for multi-label 12-lead ECG classification: tensor
//! kernels with explicit backward passes, recurrent cells, model assembly,
//! PTB-XL ingestion, training and evaluation metrics.

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod real;
pub mod recurrent;
pub mod reporting;
pub mod seed;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use kernels::Mode;
pub use model::{build, presets, ArchitectureSpec, Model};
pub use real::{DType, Real};
pub use tensor::Tensor;
