//! Weighted smoothed loss, AdamW with cosine annealing and clipping, and the
//! early-stopped training loop.

mod fit;
mod loss;
mod optim;

pub use fit::{
    epoch_log_csv, evaluate_loss, fit, fit_with_monitor, train_step, EarlyStopping, EpochLog, FitOutcome, Split,
};
pub use loss::{batch_loss, class_weights, loss, LossSpec};
pub use optim::{clip_gradients, cosine_lr, cosine_lr_restarts, OptState, ADAM_EPS, BETA1, BETA2};
