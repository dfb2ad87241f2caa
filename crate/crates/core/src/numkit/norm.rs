use super::Matrix;
use crate::error::{Error, Result};

/// Saved statistics from a layer-norm forward pass.
#[derive(Clone, Debug)]
pub struct LayerNormCache {
    /// Normalized input before the affine step.
    pub xhat: Matrix,
    pub inv_std: Vec<f64>,
}

/// Row-wise layer normalization followed by a per-feature affine map.
pub fn layernorm(x: &Matrix, gain: &[f64], bias: &[f64], eps: f64) -> Result<Matrix> {
    Ok(layernorm_forward(x, gain, bias, eps)?.0)
}

pub fn layernorm_forward(
    x: &Matrix,
    gain: &[f64],
    bias: &[f64],
    eps: f64,
) -> Result<(Matrix, LayerNormCache)> {
    let f = x.cols();
    if gain.len() != f || bias.len() != f {
        return Err(Error::shape("layernorm", x.shape(), (gain.len(), bias.len())));
    }
    if eps <= 0.0 {
        return Err(Error::config("layernorm eps must be positive"));
    }
    let mut out = Matrix::zeros(x.rows(), f);
    let mut xhat = Matrix::zeros(x.rows(), f);
    let mut inv_std = Vec::with_capacity(x.rows());
    let n = f as f64;
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let is = 1.0 / (var + eps).sqrt();
        inv_std.push(is);
        let xh = xhat.row_mut(r);
        for (h, v) in xh.iter_mut().zip(row) {
            *h = (v - mean) * is;
        }
        let xh = xhat.row(r);
        for ((o, h), (g, b)) in out.row_mut(r).iter_mut().zip(xh).zip(gain.iter().zip(bias)) {
            *o = h * g + b;
        }
    }
    Ok((out, LayerNormCache { xhat, inv_std }))
}

/// Returns `(dx, dgain, dbias)`.
pub fn layernorm_backward(
    cache: &LayerNormCache,
    gain: &[f64],
    dout: &Matrix,
) -> (Matrix, Vec<f64>, Vec<f64>) {
    let (rows, f) = dout.shape();
    let n = f as f64;
    let mut dx = Matrix::zeros(rows, f);
    let mut dgain = vec![0.0; f];
    let mut dbias = vec![0.0; f];
    let mut dxhat = vec![0.0; f];
    for r in 0..rows {
        let dy = dout.row(r);
        let xh = cache.xhat.row(r);
        let mut sum_d = 0.0;
        let mut sum_dx = 0.0;
        for j in 0..f {
            dgain[j] += dy[j] * xh[j];
            dbias[j] += dy[j];
            dxhat[j] = dy[j] * gain[j];
            sum_d += dxhat[j];
            sum_dx += dxhat[j] * xh[j];
        }
        let is = cache.inv_std[r];
        for (j, o) in dx.row_mut(r).iter_mut().enumerate() {
            *o = is * (dxhat[j] - sum_d / n - xh[j] * sum_dx / n);
        }
    }
    (dx, dgain, dbias)
}
