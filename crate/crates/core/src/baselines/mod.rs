//! Classical comparators run through the same cross-validation harness.

mod gnb;
mod knn;
mod logreg;

pub use gnb::{GnbLearner, GnbModel, VAR_FLOOR, VAR_SMOOTHING};
pub use knn::{KnnLearner, KnnModel, DEFAULT_K};
pub use logreg::{LogRegLearner, LogRegModel, DEFAULT_L2, DEFAULT_MAX_EPOCHS, GRAD_TOL};

use crate::eval::Learner;

/// Baseline learners by CLI name.
pub fn by_name(name: &str) -> Option<Box<dyn Learner>> {
    match name {
        "gnb" => Some(Box::new(GnbLearner)),
        "logreg" => Some(Box::new(LogRegLearner::default())),
        "knn" => Some(Box::new(KnnLearner::default())),
        _ => None,
    }
}

pub const NAMES: [&str; 3] = ["gnb", "logreg", "knn"];
