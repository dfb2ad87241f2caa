//! Residual BiGRU + CLS attention pooling classifier for tabular data, with
//! leakage-free preprocessing, stratified cross-validation, classical
//! baselines and embedding projection.

pub mod baselines;
pub mod data;
pub mod embedviz;
pub mod error;
pub mod eval;
pub mod layers;
pub mod model;
pub mod numkit;
pub mod train;

pub use error::{Error, Result};
pub use numkit::{Matrix, Rng};
