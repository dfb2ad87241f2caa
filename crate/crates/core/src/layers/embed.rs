use serde::{Deserialize, Serialize};

use super::seq::dropout_mask;
use super::{ParamId, ParamSet, SeqBatch};
use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};

/// How feature columns are lifted to `d_model`-wide tokens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    /// One scalar → d_model map shared by every column.
    #[default]
    Shared,
    /// An independent scalar → d_model map per column.
    PerColumn,
}

/// Scalar-to-vector token embedding: token `t` is `x[t] * w_t + b_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnEmbedding {
    pub weight: ParamId,
    pub bias: ParamId,
    pub kind: EmbeddingKind,
    pub columns: usize,
    pub d_model: usize,
}

impl ColumnEmbedding {
    pub fn new(
        params: &mut ParamSet,
        kind: EmbeddingKind,
        columns: usize,
        d_model: usize,
        rng: &mut Rng,
    ) -> Self {
        let rows = match kind {
            EmbeddingKind::Shared => 1,
            EmbeddingKind::PerColumn => columns,
        };
        // fan_in is 1 for a scalar input
        let mut w = Matrix::zeros(rows, d_model);
        w.as_mut_slice().iter_mut().for_each(|v| *v = rng.uniform_range(-1.0, 1.0));
        ColumnEmbedding {
            weight: params.add("embed.weight", w),
            bias: params.add("embed.bias", Matrix::zeros(rows, d_model)),
            kind,
            columns,
            d_model,
        }
    }

    fn slot(&self, t: usize) -> usize {
        match self.kind {
            EmbeddingKind::Shared => 0,
            EmbeddingKind::PerColumn => t,
        }
    }

    /// `x` is `batch × columns`; the result has `columns` steps.
    pub fn forward(&self, params: &ParamSet, x: &Matrix) -> SeqBatch {
        assert_eq!(x.cols(), self.columns, "embedding input width");
        let batch = x.rows();
        let mut out = SeqBatch::zeros(self.columns, batch, self.d_model);
        let (w, bias) = (&params[self.weight], &params[self.bias]);
        for t in 0..self.columns {
            let (wr, br) = (w.row(self.slot(t)), bias.row(self.slot(t)));
            for b in 0..batch {
                let v = x.get(b, t);
                for ((o, wv), bv) in out.token_mut(t, b).iter_mut().zip(wr).zip(br) {
                    *o = v * wv + bv;
                }
            }
        }
        out
    }

    pub fn backward(&self, x: &Matrix, d_out: &SeqBatch, grads: &mut ParamSet) {
        let rows = grads[self.weight].rows();
        let mut dw = Matrix::zeros(rows, self.d_model);
        let mut db = Matrix::zeros(rows, self.d_model);
        for t in 0..self.columns {
            let s = self.slot(t);
            for b in 0..x.rows() {
                let v = x.get(b, t);
                let g = d_out.token(t, b);
                for (o, gv) in dw.row_mut(s).iter_mut().zip(g) {
                    *o += v * gv;
                }
                for (o, gv) in db.row_mut(s).iter_mut().zip(g) {
                    *o += gv;
                }
            }
        }
        grads.accumulate(self.weight, dw.as_slice());
        grads.accumulate(self.bias, db.as_slice());
    }
}

/// Zeroes whole tokens with probability `p_f` and rescales survivors. Returns
/// the per-token multipliers (length `steps × batch`), or `None` in eval mode
/// or when `p_f == 0`.
pub fn feature_dropout(
    seq: &mut SeqBatch,
    p_f: f64,
    rng: Option<&mut Rng>,
) -> Result<Option<Vec<f64>>> {
    if !(0.0..1.0).contains(&p_f) {
        return Err(Error::config(format!("feature dropout rate {p_f} must lie in [0, 1)")));
    }
    let Some(rng) = rng else { return Ok(None) };
    if p_f == 0.0 {
        return Ok(None);
    }
    let mask = dropout_mask(seq.steps * seq.batch, p_f, rng);
    for (row, m) in mask.iter().enumerate() {
        seq.data.row_mut(row).iter_mut().for_each(|v| *v *= m);
    }
    Ok(Some(mask))
}

pub(crate) fn feature_dropout_backward(d: &mut SeqBatch, mask: &[f64]) {
    for (row, m) in mask.iter().enumerate() {
        d.data.row_mut(row).iter_mut().for_each(|v| *v *= m);
    }
}
