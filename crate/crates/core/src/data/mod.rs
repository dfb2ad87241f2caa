//! Cleveland ingestion, stratified fold planning and leakage-free preprocessing.

mod folds;
mod load;
mod preprocess;

pub use folds::{plan_folds, Fold, FoldPlan, VALIDATION_FRACTION};
pub use load::{
    binarize_target, load_cleveland, parse_cleveland, ColumnKind, ColumnSchema, ColumnSpec, Dataset,
    CLEVELAND_COLUMNS, TARGET_COLUMN,
};
pub use preprocess::{FittedColumn, FittedStats, PrepConfig, Preprocessor};
