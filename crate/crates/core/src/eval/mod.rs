//! Splits, training, metrics and benchmark reports.

pub mod benchmark;
pub mod metrics;
pub mod split;
pub mod train;

pub use benchmark::{
    infer_input_dims, prepare_samples, run_benchmark, BenchmarkConfig, BenchmarkReport,
    CellFailure, FoldResult, Method, MethodReport, PreparedSample,
};
pub use metrics::{aggregate, compute_metrics, Metrics};
pub use split::{
    event_five_fold_split, make_split, temporal_split, Fold, SplitKind, SplitSpec, NUM_FOLDS,
};
pub use train::{
    carve_validation, predict_all, train_model, EpochRecord, Example, TrainConfig, TrainOutcome,
};
