//! Metrics, threshold tuning and the cross-validation protocol.

mod cv;
mod metrics;

pub use cv::{
    run_ablation_suite, run_cv, run_cv_with, CvOptions, FoldRecord, FoldResult, Fitted, Learner, MetricsReport,
    NeuralLearner, Predictor, Protocol, Stat, Summary,
};
pub use metrics::{
    confusion_metrics, mean, pr_auc, roc_auc, sample_std, sweep_threshold, threshold_grid, GRID_POINTS,
};
