//! Optimisation: smoothed BCE loss, Adam, plateau and early-stopping
//! schedules, the epoch loop and cross-validation.

pub mod adam;
pub mod cv;
pub mod loss;
pub mod schedule;
pub mod trainer;

pub use adam::{clip_global_norm, AdamConfig, OptimizerState};
pub use cv::{aggregate, cross_validate, cv_partitions, CvReport, FoldResult, MeanStd, CV_GROUPS};
pub use loss::{bce_smoothed_loss, PROB_CLAMP};
pub use schedule::{EarlyStopping, PlateauScheduler, StopDecision};
pub use trainer::{eval_generator, make_generators, predict_set, train, train_step, EpochRecord, TrainConfig, TrainLog};
