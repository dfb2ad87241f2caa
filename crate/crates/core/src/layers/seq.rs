use crate::numkit::{Matrix, Rng};

/// A batch of equal-length token sequences, stored time-major: row
/// `t * batch + b` holds token `t` of sample `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqBatch {
    pub steps: usize,
    pub batch: usize,
    pub data: Matrix,
}

impl SeqBatch {
    pub fn new(steps: usize, batch: usize, data: Matrix) -> Self {
        assert_eq!(data.rows(), steps * batch, "SeqBatch rows");
        SeqBatch { steps, batch, data }
    }

    pub fn zeros(steps: usize, batch: usize, width: usize) -> Self {
        SeqBatch::new(steps, batch, Matrix::zeros(steps * batch, width))
    }

    /// Single-sample batch from a `T × width` matrix.
    pub fn from_single(seq: &Matrix) -> Self {
        SeqBatch::new(seq.rows(), 1, seq.clone())
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.data.cols()
    }

    #[inline]
    pub fn token(&self, t: usize, b: usize) -> &[f64] {
        self.data.row(t * self.batch + b)
    }

    #[inline]
    pub fn token_mut(&mut self, t: usize, b: usize) -> &mut [f64] {
        let batch = self.batch;
        self.data.row_mut(t * batch + b)
    }

    /// Rows of time step `t` for every sample, as a contiguous block.
    #[inline]
    pub fn step(&self, t: usize) -> &[f64] {
        self.data.row_block(t * self.batch, self.batch)
    }

    /// Sample `b` as a `T × width` matrix.
    pub fn sample(&self, b: usize) -> Matrix {
        let mut out = Matrix::zeros(self.steps, self.width());
        for t in 0..self.steps {
            out.row_mut(t).copy_from_slice(self.token(t, b));
        }
        out
    }
}

/// Inverted-dropout multipliers: each entry is 0 with probability `p`,
/// else `1 / (1 - p)`.
pub fn dropout_mask(len: usize, p: f64, rng: &mut Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.bernoulli(p) { 0.0 } else { keep })
        .collect()
}

pub(crate) fn apply_mask(values: &mut [f64], mask: &[f64]) {
    for (v, m) in values.iter_mut().zip(mask) {
        *v *= m;
    }
}
