use super::SeqBatch;
use crate::numkit::Matrix;

/// Column-wise mean and max over time, concatenated: `batch × 2f`.
pub fn meanmax_pool(h: &SeqBatch) -> (Matrix, Vec<usize>) {
    let (steps, batch, f) = (h.steps, h.batch, h.width());
    assert!(steps >= 1, "meanmax_pool needs at least one step");
    let mut out = Matrix::zeros(batch, 2 * f);
    let mut argmax = vec![0usize; batch * f];
    for b in 0..batch {
        let row = out.row_mut(b);
        row[f..].copy_from_slice(h.token(0, b));
        for t in 0..steps {
            let tok = h.token(t, b);
            for j in 0..f {
                row[j] += tok[j];
                if t > 0 && tok[j] > row[f + j] {
                    row[f + j] = tok[j];
                    argmax[b * f + j] = t;
                }
            }
        }
        for v in &mut row[..f] {
            *v /= steps as f64;
        }
    }
    (out, argmax)
}

pub fn meanmax_backward(h: &SeqBatch, argmax: &[usize], d_out: &Matrix) -> Matrix {
    let (steps, batch, f) = (h.steps, h.batch, h.width());
    let mut dh = Matrix::zeros(steps * batch, f);
    let inv = 1.0 / steps as f64;
    for b in 0..batch {
        let d = d_out.row(b);
        for t in 0..steps {
            for (o, g) in dh.row_mut(t * batch + b).iter_mut().zip(&d[..f]) {
                *o = g * inv;
            }
        }
        for j in 0..f {
            let t = argmax[b * f + j];
            let v = dh.get(t * batch + b, j);
            dh.set(t * batch + b, j, v + d[f + j]);
        }
    }
    dh
}
