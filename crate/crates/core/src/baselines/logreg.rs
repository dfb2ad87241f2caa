use crate::error::{Error, Result};
use crate::eval::{Fitted, Learner, Predictor};
use crate::numkit::{sigmoid, Matrix, Rng};
use crate::train::Split;

pub const DEFAULT_L2: f64 = 1.0;
pub const DEFAULT_MAX_EPOCHS: usize = 200_000;
pub const GRAD_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
    /// Gradient norm at the returned parameters.
    pub grad_norm: f64,
    pub epochs: usize,
}

/// Objective `mean BCE + l2 / (2n) |w|^2` (bias unpenalized) and its gradient.
fn objective(x: &Matrix, y: &[u8], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = y.len() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    let mut value = 0.0;
    for (r, &yi) in y.iter().enumerate() {
        let row = x.row(r);
        let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        // log(1 + e^z) - y z, evaluated stably
        value += z.max(0.0) + (-z.abs()).exp().ln_1p() - f64::from(yi) * z;
        let e = sigmoid(z) - f64::from(yi);
        gw.iter_mut().zip(row).for_each(|(g, a)| *g += e * a);
        gb += e;
    }
    value /= n;
    value += 0.5 * l2 / n * w.iter().map(|v| v * v).sum::<f64>();
    gw.iter_mut().zip(w).for_each(|(g, wi)| *g = *g / n + l2 / n * wi);
    (value, gw, gb / n)
}

impl LogRegModel {
    pub fn zeros(d: usize, l2: f64) -> Self {
        LogRegModel {
            weights: vec![0.0; d],
            bias: 0.0,
            l2,
            grad_norm: f64::INFINITY,
            epochs: 0,
        }
    }

    /// Full-batch gradient descent from zero. A step that raises the
    /// objective is retried at half the learning rate.
    pub fn fit(x: &Matrix, y: &[u8], l2: f64, max_epochs: usize) -> Result<Self> {
        if x.rows() != y.len() || y.is_empty() {
            return Err(Error::shape("logistic regression", x.shape(), (y.len(), 1)));
        }
        let mut m = LogRegModel::zeros(x.cols(), l2);
        let mut lr = 1.0;
        let (mut value, mut gw, mut gb) = objective(x, y, &m.weights, m.bias, l2);
        let norm = |gw: &[f64], gb: f64| (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        m.grad_norm = norm(&gw, gb);
        while m.epochs < max_epochs && m.grad_norm > GRAD_TOL {
            let w_new: Vec<f64> = m.weights.iter().zip(&gw).map(|(w, g)| w - lr * g).collect();
            let b_new = m.bias - lr * gb;
            let (v_new, gw_new, gb_new) = objective(x, y, &w_new, b_new, l2);
            if !v_new.is_finite() || v_new > value {
                lr *= 0.5;
                if lr < 1e-12 {
                    return Err(Error::Divergence {
                        epoch: m.epochs,
                        batch: 0,
                        msg: "logistic regression step size underflowed".into(),
                    });
                }
                continue;
            }
            m.weights = w_new;
            m.bias = b_new;
            (value, gw, gb) = (v_new, gw_new, gb_new);
            m.grad_norm = norm(&gw, gb);
            m.epochs += 1;
        }
        Ok(m)
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.bias + x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>())
    }
}

impl Predictor for LogRegModel {
    fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.weights.len() {
            return Err(Error::Schema {
                expected: self.weights.len(),
                got: x.cols(),
            });
        }
        Ok((0..x.rows()).map(|r| self.probability(x.row(r))).collect())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LogRegLearner {
    pub l2: f64,
    pub max_epochs: usize,
}

impl Default for LogRegLearner {
    fn default() -> Self {
        LogRegLearner {
            l2: DEFAULT_L2,
            max_epochs: DEFAULT_MAX_EPOCHS,
        }
    }
}

impl Learner for LogRegLearner {
    fn name(&self) -> String {
        "logreg".into()
    }

    fn fit(&self, train: Split<'_>, _val: Split<'_>, _rng: &mut Rng) -> Result<Fitted> {
        Ok(Fitted::plain(LogRegModel::fit(train.x, train.y, self.l2, self.max_epochs)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epochs_is_half_everywhere() {
        let x = Matrix::from_vec(3, 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, 3.0]).unwrap();
        let m = LogRegModel::fit(&x, &[0, 1, 1], 1.0, 0).unwrap();
        assert!(m.predict_proba(&x).unwrap().iter().all(|p| *p == 0.5));
    }

    #[test]
    fn separable_one_dimensional_set() {
        let xs: Vec<f64> = (0..20).map(|i| f64::from(i) - 9.5).collect();
        let y: Vec<u8> = xs.iter().map(|v| u8::from(*v > 0.0)).collect();
        let x = Matrix::from_vec(20, 1, xs).unwrap();
        let m = LogRegModel::fit(&x, &y, 1.0, DEFAULT_MAX_EPOCHS).unwrap();
        let p = m.predict_proba(&x).unwrap();
        assert!(p.iter().zip(&y).all(|(pi, &yi)| (*pi >= 0.5) == (yi == 1)));
        assert!(m.grad_norm <= GRAD_TOL);
    }

    #[test]
    fn optimum_has_small_gradient() {
        let mut rng = Rng::new(2);
        let x = Matrix::from_vec(60, 4, (0..240).map(|_| rng.normal()).collect()).unwrap();
        let y: Vec<u8> = (0..60).map(|r| u8::from(x.get(r, 0) + 0.5 * rng.normal() > 0.0)).collect();
        let m = LogRegModel::fit(&x, &y, 1.0, DEFAULT_MAX_EPOCHS).unwrap();
        let (_, gw, gb) = objective(&x, &y, &m.weights, m.bias, 1.0);
        let g = (gw.iter().map(|v| v * v).sum::<f64>() + gb * gb).sqrt();
        assert!(g <= GRAD_TOL, "{g}");
        // gradient agrees with finite differences of the objective
        let h = 1e-6;
        for j in 0..4 {
            let mut wp = m.weights.clone();
            wp[j] += h;
            let mut wm = m.weights.clone();
            wm[j] -= h;
            let fd = (objective(&x, &y, &wp, m.bias, 1.0).0 - objective(&x, &y, &wm, m.bias, 1.0).0) / (2.0 * h);
            assert!((fd - gw[j]).abs() < 1e-7);
        }
    }
}
