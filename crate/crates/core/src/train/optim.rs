use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::layers::ParamSet;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// AdamW moment accumulators for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct OptState {
    m: ParamSet,
    v: ParamSet,
    step: u64,
}

impl OptState {
    pub fn new(params: &ParamSet) -> Self {
        OptState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One AdamW update. Weight decay acts on the parameters directly and
    /// does not pass through the moment estimates.
    pub fn adamw_step(&mut self, params: &mut ParamSet, grads: &ParamSet, lr: f64, weight_decay: f64) -> Result<()> {
        if !params.same_layout(grads) || !params.same_layout(&self.m) {
            return Err(Error::State("optimizer, parameter and gradient layouts differ".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let tensors = params.tensors_mut();
        for (i, w) in tensors.iter_mut().enumerate() {
            let g = grads.tensors()[i].as_slice();
            let m = self.m.tensors_mut()[i].as_mut_slice();
            let v = self.v.tensors_mut()[i].as_mut_slice();
            for (k, wk) in w.as_mut_slice().iter_mut().enumerate() {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * g[k];
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * g[k] * g[k];
                let update = (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
                *wk -= lr * weight_decay * *wk + lr * update;
            }
        }
        Ok(())
    }
}

/// Single descending cosine arc from `lr_max` at epoch 0 to `lr_min` at `total`.
pub fn cosine_lr(epoch: usize, total: usize, lr_max: f64, lr_min: f64) -> f64 {
    if total == 0 {
        return lr_max;
    }
    let e = epoch.min(total) as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (PI * e / total as f64).cos())
}

/// Cosine schedule restarting every `period` epochs.
pub fn cosine_lr_restarts(epoch: usize, period: usize, lr_max: f64, lr_min: f64) -> f64 {
    cosine_lr(epoch % period.max(1), period, lr_max, lr_min)
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_gradients(grads: &mut ParamSet, max_norm: f64) -> Result<f64> {
    let norm = grads.global_norm();
    if !norm.is_finite() {
        return Err(Error::NonFinite("gradient norm".into()));
    }
    if norm > max_norm {
        let s = max_norm / norm;
        grads.tensors_mut().iter_mut().for_each(|t| t.scale(s));
    }
    Ok(norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Matrix;
    use proptest::prelude::*;

    fn single(values: &[f64]) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.add("w", Matrix::row_vector(values));
        ps
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut p = single(&[1.5, -2.0]);
        let before = p.clone();
        let g = p.zeros_like();
        OptState::new(&p).adamw_step(&mut p, &g, 0.1, 0.0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut p = single(&[1.0]);
        let g = single(&[1.0]);
        OptState::new(&p).adamw_step(&mut p, &g, 0.1, 0.0).unwrap();
        let expect = 1.0 - 0.1 * 1.0 / (1.0 + ADAM_EPS);
        assert!((p.tensors()[0].get(0, 0) - expect).abs() < 1e-15);
    }

    #[test]
    fn decoupled_decay_halves() {
        let mut p = single(&[4.0, -2.0]);
        let g = p.zeros_like();
        OptState::new(&p).adamw_step(&mut p, &g, 1.0, 0.5).unwrap();
        assert_eq!(p.tensors()[0].as_slice(), &[2.0, -1.0]);
    }

    #[test]
    fn second_moments_stay_nonnegative_and_steps_count() {
        let mut p = single(&[0.3, 0.1]);
        let mut opt = OptState::new(&p);
        for k in 0..5 {
            let g = single(&[(k as f64) - 2.0, 1.0]);
            opt.adamw_step(&mut p, &g, 0.01, 0.01).unwrap();
        }
        assert_eq!(opt.step_count(), 5);
        assert!(opt.v.tensors()[0].as_slice().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn cosine_boundaries() {
        assert_eq!(cosine_lr(0, 150, 8e-4, 1e-5), 8e-4);
        assert_eq!(cosine_lr(150, 150, 8e-4, 1e-5), 1e-5);
        assert!((cosine_lr(75, 150, 8e-4, 0.0) - 4e-4).abs() < 1e-18);
        let lrs: Vec<f64> = (0..=150).map(|e| cosine_lr(e, 150, 8e-4, 0.0)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(cosine_lr_restarts(50, 50, 1.0, 0.0), 1.0);
    }

    #[test]
    fn clip_examples() {
        let mut g = single(&[3.0, 4.0]);
        assert_eq!(clip_gradients(&mut g, 5.0).unwrap(), 5.0);
        assert_eq!(g.tensors()[0].as_slice(), &[3.0, 4.0]);
        let mut g = single(&[6.0, 8.0]);
        clip_gradients(&mut g, 5.0).unwrap();
        assert_eq!(g.tensors()[0].as_slice(), &[3.0, 4.0]);
        let mut g = single(&[f64::NAN]);
        assert!(clip_gradients(&mut g, 5.0).is_err());
    }

    proptest! {
        #[test]
        fn clip_never_grows_and_is_idempotent(v in proptest::collection::vec(-50.0f64..50.0, 1..20), max in 0.1f64..20.0) {
            let mut g = single(&v);
            let before = g.global_norm();
            clip_gradients(&mut g, max).unwrap();
            let once = g.clone();
            prop_assert!(g.global_norm() <= before + 1e-12);
            clip_gradients(&mut g, max).unwrap();
            for (a, b) in g.tensors()[0].as_slice().iter().zip(once.tensors()[0].as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
