use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{confusion_metrics, sweep_threshold};
use crate::layers::ParamSet;
use crate::model::{ModelConfig, Network, StopCriterion};
use crate::numkit::{Matrix, Rng};

use super::loss::{batch_loss, class_weights, loss, LossSpec};
use super::optim::{clip_gradients, cosine_lr, cosine_lr_restarts, OptState};

/// Encoded features with binary labels.
#[derive(Clone, Copy, Debug)]
pub struct Split<'a> {
    pub x: &'a Matrix,
    pub y: &'a [u8],
}

impl<'a> Split<'a> {
    pub fn new(x: &'a Matrix, y: &'a [u8]) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::shape("split", x.shape(), (y.len(), 1)));
        }
        Ok(Split { x, y })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_macro_f1: f64,
}

pub fn epoch_log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,lr,train_loss,val_loss,val_macro_f1\n");
    for e in log {
        let _ = writeln!(out, "{},{:e},{:.6},{:.6},{:.6}", e.epoch, e.lr, e.train_loss, e.val_loss, e.val_macro_f1);
    }
    out
}

/// Tracks the best monitored score and a snapshot of the parameters that
/// produced it. Higher scores are better.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    since: usize,
    snapshot: Option<ParamSet>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            best_epoch: 0,
            since: 0,
            snapshot: None,
        }
    }

    /// Records an epoch's score; returns true once patience is exhausted.
    pub fn observe(&mut self, epoch: usize, score: f64, params: &ParamSet) -> bool {
        if self.best.is_none_or(|b| score > b) {
            self.best = Some(score);
            self.best_epoch = epoch;
            self.since = 0;
            self.snapshot = Some(params.clone());
            false
        } else {
            self.since += 1;
            self.since >= self.patience
        }
    }

    pub fn best_score(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn epochs_since_improvement(&self) -> usize {
        self.since
    }

    pub fn into_snapshot(self) -> Option<ParamSet> {
        self.snapshot
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub network: Network,
    pub threshold: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub history: Vec<EpochLog>,
}

/// Mean loss on a split in eval mode.
pub fn evaluate_loss(net: &Network, split: Split<'_>, spec: &LossSpec) -> Result<(f64, Vec<f64>)> {
    let p = net.predict_proba(split.x)?;
    let total: f64 = p.iter().zip(split.y).map(|(&pi, &yi)| loss(pi, yi, spec).0).sum();
    Ok((total / p.len() as f64, p))
}

fn gather(x: &Matrix, idx: &[usize]) -> Matrix {
    let mut data = Vec::with_capacity(idx.len() * x.cols());
    for &i in idx {
        data.extend_from_slice(x.row(i));
    }
    Matrix::from_vec(idx.len(), x.cols(), data).expect("finite rows")
}

/// Forward, backward, clip and one AdamW update on a single minibatch.
/// Dropout is active iff `rng` is given. Returns the batch loss before the update.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    net: &mut Network,
    opt: &mut OptState,
    x: &Matrix,
    y: &[u8],
    spec: &LossSpec,
    lr: f64,
    rng: Option<&mut Rng>,
) -> Result<f64> {
    let (logits, tape) = net.forward_batch(x, rng)?;
    let (value, d_logits) = batch_loss(&logits, y, spec);
    if !value.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    let mut grads = net.params().zeros_like();
    net.backward(&tape, &d_logits, &mut grads);
    let clip = net.config().clip_norm;
    let wd = net.config().weight_decay;
    clip_gradients(&mut grads, clip)?;
    opt.adamw_step(net.params_mut(), &grads, lr, wd)?;
    Ok(value)
}

/// Trains with the configured recipe, early-stopping on the configured
/// criterion, then tunes the decision threshold on the validation split.
pub fn fit(cfg: &ModelConfig, train: Split<'_>, val: Split<'_>, rng: &mut Rng) -> Result<FitOutcome> {
    let criterion = cfg.early_stopping;
    fit_with_monitor(cfg, train, val, rng, |_, val_loss, val_f1| match criterion {
        StopCriterion::MacroF1 => val_f1,
        StopCriterion::ValLoss => -val_loss,
    })
}

/// `fit` with the early-stopping score supplied by `monitor(epoch,
/// val_loss, val_macro_f1)`.
pub fn fit_with_monitor(
    cfg: &ModelConfig,
    train: Split<'_>,
    val: Split<'_>,
    rng: &mut Rng,
    mut monitor: impl FnMut(usize, f64, f64) -> f64,
) -> Result<FitOutcome> {
    cfg.validate()?;
    let weights = class_weights(train.y)?;
    if val.y.is_empty() || !val.y.contains(&0) || !val.y.contains(&1) {
        return Err(Error::DegenerateSplit("validation split must contain both classes".into()));
    }
    let spec = LossSpec::new(cfg.label_smoothing, weights)?;
    let mut net = Network::new(cfg, train.x.cols(), rng)?;
    let mut opt = OptState::new(net.params());
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.y.len()).collect();
    let mut epochs_run = 0;
    for epoch in 0..cfg.epochs {
        let lr = if cfg.warm_restarts {
            cosine_lr_restarts(epoch, cfg.restart_period, cfg.lr, cfg.lr_min)
        } else {
            cosine_lr(epoch, cfg.epochs, cfg.lr, cfg.lr_min)
        };
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let xb = gather(train.x, idx);
            let yb: Vec<u8> = idx.iter().map(|&i| train.y[i]).collect();
            let value = train_step(&mut net, &mut opt, &xb, &yb, &spec, lr, Some(rng)).map_err(|e| match e {
                Error::NonFinite(msg) => Error::Divergence { epoch, batch, msg },
                other => other,
            })?;
            loss_sum += value * idx.len() as f64;
        }
        let train_loss = loss_sum / order.len() as f64;
        let (val_loss, p_val) = evaluate_loss(&net, val, &spec)?;
        let (_, val_f1) = confusion_metrics(val.y, &p_val, 0.5)?;
        history.push(EpochLog {
            epoch,
            lr,
            train_loss,
            val_loss,
            val_macro_f1: val_f1,
        });
        epochs_run = epoch + 1;
        if stopper.observe(epoch, monitor(epoch, val_loss, val_f1), net.params()) {
            break;
        }
    }
    let best_epoch = stopper.best_epoch();
    if let Some(best) = stopper.into_snapshot() {
        *net.params_mut() = best;
    }
    let threshold = sweep_threshold(val.y, &net.predict_proba(val.x)?)?;
    Ok(FitOutcome {
        network: net,
        threshold,
        best_epoch,
        epochs_run,
        history,
    })
}
