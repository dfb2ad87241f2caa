use crate::error::{Error, Result};
use crate::numkit::sigmoid;

const P_CLAMP: f64 = 1e-7;

/// Class-weighted, label-smoothed binary cross-entropy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec {
    pub smoothing: f64,
    pub w0: f64,
    pub w1: f64,
}

impl LossSpec {
    pub fn new(smoothing: f64, (w0, w1): (f64, f64)) -> Result<Self> {
        if !(0.0..0.5).contains(&smoothing) {
            return Err(Error::config(format!("label smoothing {smoothing} must lie in [0, 0.5)")));
        }
        if !(w0 > 0.0 && w1 > 0.0 && w0.is_finite() && w1.is_finite()) {
            return Err(Error::config("class weights must be positive"));
        }
        Ok(LossSpec { smoothing, w0, w1 })
    }

    pub fn plain() -> Self {
        LossSpec { smoothing: 0.0, w0: 1.0, w1: 1.0 }
    }

    /// Smoothed target for label `y`.
    pub fn target(&self, y: u8) -> f64 {
        if y == 1 {
            1.0 - self.smoothing
        } else {
            self.smoothing
        }
    }

    pub fn weight(&self, y: u8) -> f64 {
        if y == 1 {
            self.w1
        } else {
            self.w0
        }
    }
}

/// Inverse-frequency weights `n / (2 n_c)`.
pub fn class_weights(y: &[u8]) -> Result<(f64, f64)> {
    let n1 = y.iter().filter(|&&v| v == 1).count();
    let n0 = y.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::DegenerateSplit(format!(
            "training labels contain a single class ({n0} negatives, {n1} positives)"
        )));
    }
    let n = y.len() as f64;
    Ok((n / (2.0 * n0 as f64), n / (2.0 * n1 as f64)))
}

/// Loss for one probability and its derivative with respect to the logit.
/// `p` is clamped before the logs; the derivative `w (p - target)` is taken
/// from the unclamped value so it never goes flat.
pub fn loss(p: f64, y: u8, spec: &LossSpec) -> (f64, f64) {
    let t = spec.target(y);
    let w = spec.weight(y);
    let pc = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
    let value = -w * (t * pc.ln() + (1.0 - t) * (1.0 - pc).ln());
    (value, w * (p - t))
}

/// Mean loss over a batch of logits and the per-logit gradient of that mean.
pub fn batch_loss(logits: &[f64], y: &[u8], spec: &LossSpec) -> (f64, Vec<f64>) {
    let n = logits.len() as f64;
    let mut total = 0.0;
    let grads = logits
        .iter()
        .zip(y)
        .map(|(&z, &yi)| {
            let (v, g) = loss(sigmoid(z), yi, spec);
            total += v;
            g / n
        })
        .collect();
    (total / n, grads)
}
