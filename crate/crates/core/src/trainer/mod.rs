//! Run-level splitting, two-phase training with early stopping, and
//! evaluation in matrix and density units.

mod metrics;
mod split;
mod train;

pub use metrics::{baseline_persistence, evaluate, Metrics, MetricsTable};
pub use split::{apply_assignment, split_dataset, split_runs, subsample_per_run, DatasetSplit};
pub use train::{
    train_phase, train_phases, train_step, train_two_phase, validation_losses, EarlyStopping, EpochRecord, PhaseReport,
    TrainOptions, TrainingReport, DEFAULT_BATCH_SIZE, DEFAULT_PATIENCE, MAX_EPOCHS,
};
