//! Training and evaluation for the graph classifiers: stratified splits,
//! class-balanced resampling, Adam with plateau learning-rate decay, the
//! epoch loop, metrics, and the depth sweep.

mod batch;
mod data;
mod error;
mod metrics;
mod optim;
mod split;
mod sweep;
mod train;

pub use batch::balanced_batches;
pub use data::Dataset;
pub use error::{Result, TrainError};
pub use metrics::{evaluate, evaluate_predictions, Metrics};
pub use optim::{adam_step, AdamState, PlateauScheduler};
pub use split::{stratified_split, Split};
pub use sweep::{depth_sweep, sweep_grid, variant_label, SweepCell};
pub use train::{history_table, train, EpochStats, TrainConfig, TrainOutcome};
