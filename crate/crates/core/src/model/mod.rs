//! Model configuration, ablation variants and the assembled network.

mod artifact;
mod config;
mod network;

pub use artifact::TrainedModel;
pub use config::{apply_ablation, ModelConfig, Pooling, StopCriterion, Variant};
pub use network::{Network, Tape};
