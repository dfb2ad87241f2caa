use crate::error::{Error, Result};
use crate::eval::{Fitted, Learner, Predictor};
use crate::numkit::{sigmoid, Matrix, Rng};
use crate::train::Split;

/// Relative variance smoothing, as a fraction of the largest feature variance.
pub const VAR_SMOOTHING: f64 = 1e-9;
pub const VAR_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct GnbModel {
    /// Class priors, indexed by label.
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub vars: [Vec<f64>; 2],
}

impl GnbModel {
    pub fn fit(x: &Matrix, y: &[u8]) -> Result<Self> {
        let d = x.cols();
        let mut counts = [0usize; 2];
        let mut means = [vec![0.0; d], vec![0.0; d]];
        for (r, &c) in y.iter().enumerate() {
            let c = usize::from(c == 1);
            counts[c] += 1;
            means[c].iter_mut().zip(x.row(r)).for_each(|(m, v)| *m += v);
        }
        if counts.contains(&0) {
            return Err(Error::DegenerateSplit("naive Bayes needs both classes".into()));
        }
        for c in 0..2 {
            means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
        let mut vars = [vec![0.0; d], vec![0.0; d]];
        for (r, &c) in y.iter().enumerate() {
            let c = usize::from(c == 1);
            for j in 0..d {
                let dv = x.get(r, j) - means[c][j];
                vars[c][j] += dv * dv;
            }
        }
        // smoothing is relative to the largest variance over the whole set
        let n = y.len() as f64;
        let mut max_var: f64 = 0.0;
        for j in 0..d {
            let mu = (0..x.rows()).map(|r| x.get(r, j)).sum::<f64>() / n;
            let v = (0..x.rows()).map(|r| (x.get(r, j) - mu).powi(2)).sum::<f64>() / n;
            max_var = max_var.max(v);
        }
        let eps = VAR_SMOOTHING * max_var;
        for c in 0..2 {
            vars[c].iter_mut().for_each(|v| *v = (*v / counts[c] as f64 + eps).max(VAR_FLOOR));
        }
        Ok(GnbModel {
            priors: [counts[0] as f64 / n, counts[1] as f64 / n],
            means,
            vars,
        })
    }

    fn log_joint(&self, c: usize, x: &[f64]) -> f64 {
        let mut s = self.priors[c].ln();
        for ((v, m), var) in x.iter().zip(&self.means[c]).zip(&self.vars[c]) {
            s -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (v - m) * (v - m) / var);
        }
        s
    }

    /// Class-1 posterior for one row.
    pub fn posterior(&self, x: &[f64]) -> f64 {
        sigmoid(self.log_joint(1, x) - self.log_joint(0, x))
    }
}

impl Predictor for GnbModel {
    fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.means[0].len() {
            return Err(Error::Schema {
                expected: self.means[0].len(),
                got: x.cols(),
            });
        }
        Ok((0..x.rows()).map(|r| self.posterior(x.row(r))).collect())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GnbLearner;

impl Learner for GnbLearner {
    fn name(&self) -> String {
        "gnb".into()
    }

    fn fit(&self, train: Split<'_>, _val: Split<'_>, _rng: &mut Rng) -> Result<Fitted> {
        Ok(Fitted::plain(GnbModel::fit(train.x, train.y)?))
    }
}
