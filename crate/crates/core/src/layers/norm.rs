use super::{ParamId, ParamSet};
use crate::numkit::{layernorm_backward, layernorm_forward, LayerNormCache, Matrix};

/// Layer normalization with learned gain and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(params: &mut ParamSet, name: &str, width: usize, eps: f64) -> Self {
        LayerNorm {
            gain: params.add(format!("{name}.gain"), Matrix::filled(1, width, 1.0)),
            bias: params.add(format!("{name}.bias"), Matrix::zeros(1, width)),
            eps,
        }
    }

    pub fn forward(&self, params: &ParamSet, x: &Matrix) -> (Matrix, LayerNormCache) {
        layernorm_forward(x, params[self.gain].as_slice(), params[self.bias].as_slice(), self.eps)
            .expect("layer norm width")
    }

    pub fn backward(
        &self,
        params: &ParamSet,
        cache: &LayerNormCache,
        dy: &Matrix,
        grads: &mut ParamSet,
    ) -> Matrix {
        let (dx, dg, db) = layernorm_backward(cache, params[self.gain].as_slice(), dy);
        grads.accumulate(self.gain, &dg);
        grads.accumulate(self.bias, &db);
        dx
    }
}
