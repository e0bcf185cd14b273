//! Command layer of the `ecgnet` tool: run configuration, provenance records,
//! exit codes, the synthetic corpus generator and every subcommand.

pub mod commands;
pub mod config;
pub mod exit;
pub mod provenance;
pub mod synth;

pub use config::{EvalSplit, RunConfig};
