use crate::error::{Error, Result};
use crate::eval::{Fitted, Learner, Predictor};
use crate::numkit::{Matrix, Rng};
use crate::train::Split;

pub const DEFAULT_K: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct KnnModel {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub k: usize,
}

impl KnnModel {
    pub fn fit(x: &Matrix, y: &[u8], k: usize) -> Result<Self> {
        if k == 0 || k > y.len() {
            return Err(Error::config(format!("k = {k} must lie in 1..={}", y.len())));
        }
        if x.rows() != y.len() {
            return Err(Error::shape("knn", x.shape(), (y.len(), 1)));
        }
        Ok(KnnModel {
            x: x.clone(),
            y: y.to_vec(),
            k,
        })
    }

    /// Indices of the k nearest training rows; equal distances go to the lower index.
    pub fn neighbours(&self, q: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = (0..self.x.rows())
            .map(|i| (self.x.row(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.iter().take(self.k).map(|&(_, i)| i).collect()
    }

    /// Share of positive labels among the k nearest neighbours.
    pub fn probability(&self, q: &[f64]) -> f64 {
        let pos = self.neighbours(q).iter().filter(|&&i| self.y[i] == 1).count();
        pos as f64 / self.k as f64
    }
}

impl Predictor for KnnModel {
    fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.x.cols() {
            return Err(Error::Schema {
                expected: self.x.cols(),
                got: x.cols(),
            });
        }
        Ok((0..x.rows()).map(|r| self.probability(x.row(r))).collect())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KnnLearner {
    pub k: usize,
}

impl Default for KnnLearner {
    fn default() -> Self {
        KnnLearner { k: DEFAULT_K }
    }
}

impl Learner for KnnLearner {
    fn name(&self) -> String {
        "knn".into()
    }

    fn fit(&self, train: Split<'_>, _val: Split<'_>, _rng: &mut Rng) -> Result<Fitted> {
        Ok(Fitted::plain(KnnModel::fit(train.x, train.y, self.k)?))
    }
}
