use serde::{Deserialize, Serialize};

use super::{ParamId, ParamSet, SeqBatch};
use crate::error::{Error, Result};
use crate::numkit::{gemm, random_orthogonal, sigmoid, Matrix, Rng, View};

/// Which side of the update-gate interpolation the gate weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GruConvention {
    /// `h = u ⊙ h_prev + (1 - u) ⊙ ĥ`
    #[default]
    KeepPrevious,
    /// `h = (1 - u) ⊙ h_prev + u ⊙ ĥ`
    KeepCandidate,
}

/// Gated recurrent unit with the reset gate applied before the recurrent
/// candidate projection.
///
/// Gate blocks are laid out `[reset | update | candidate]` along the columns of
/// `w_x` (`in × 3H`), `w_h` (`H × 3H`) and `bias` (`1 × 3H`).
#[derive(Clone, Debug, PartialEq)]
pub struct GruCell {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub hidden: usize,
    pub convention: GruConvention,
}

/// Activations saved by [`GruCell::run`].
#[derive(Clone, Debug)]
pub struct GruCache {
    reverse: bool,
    h0: Matrix,
    /// `[r | u | ĥ]` per token row.
    gates: Matrix,
    /// `r ⊙ h_prev` per token row.
    reset_hidden: Matrix,
    /// Hidden state emitted at every token row.
    pub hidden: Matrix,
}

impl GruCell {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        inputs: usize,
        hidden: usize,
        convention: GruConvention,
        rng: &mut Rng,
    ) -> Self {
        let bound = (1.0 / inputs as f64).sqrt();
        let mut w_x = Matrix::zeros(inputs, 3 * hidden);
        w_x.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = rng.uniform_range(-bound, bound));
        let mut w_h = Matrix::zeros(hidden, 3 * hidden);
        for g in 0..3 {
            let q = random_orthogonal(hidden, rng);
            for i in 0..hidden {
                w_h.row_mut(i)[g * hidden..(g + 1) * hidden].copy_from_slice(q.row(i));
            }
        }
        GruCell {
            w_x: params.add(format!("{name}.w_x"), w_x),
            w_h: params.add(format!("{name}.w_h"), w_h),
            bias: params.add(format!("{name}.bias"), Matrix::zeros(1, 3 * hidden)),
            inputs,
            hidden,
            convention,
        }
    }

    /// One step for a single sample.
    pub fn step(&self, params: &ParamSet, x_t: &[f64], h_prev: &[f64]) -> Vec<f64> {
        let x = SeqBatch::new(1, 1, Matrix::row_vector(x_t));
        let h0 = Matrix::row_vector(h_prev);
        self.run_from(params, &x, false, h0).hidden.into_vec()
    }

    /// Runs the recurrence over every step, front to back or back to front,
    /// starting from a zero state.
    pub fn run(&self, params: &ParamSet, x: &SeqBatch, reverse: bool) -> GruCache {
        self.run_from(params, x, reverse, Matrix::zeros(x.batch, self.hidden))
    }

    fn order(steps: usize, reverse: bool) -> impl DoubleEndedIterator<Item = usize> {
        (0..steps).map(move |i| if reverse { steps - 1 - i } else { i })
    }

    fn run_from(&self, params: &ParamSet, x: &SeqBatch, reverse: bool, h0: Matrix) -> GruCache {
        assert_eq!(x.width(), self.inputs, "gru input width");
        let (steps, batch, h) = (x.steps, x.batch, self.hidden);
        let w_h = &params[self.w_h];

        let mut xw = Matrix::zeros(steps * batch, 3 * h);
        let bias = params[self.bias].as_slice();
        for r in 0..xw.rows() {
            xw.row_mut(r).copy_from_slice(bias);
        }
        gemm(1.0, x.data.view(), params[self.w_x].view(), 1.0, xw.view_mut());

        let mut gates = xw;
        let mut reset_hidden = Matrix::zeros(steps * batch, h);
        let mut hidden = Matrix::zeros(steps * batch, h);
        let mut h_prev = h0.clone();
        let mut rec_ru = Matrix::zeros(batch, 2 * h);
        let mut rec_n = Matrix::zeros(batch, h);

        for t in Self::order(steps, reverse) {
            gemm(1.0, h_prev.view(), w_h.col_view(0, 2 * h), 0.0, rec_ru.view_mut());
            for b in 0..batch {
                let row = t * batch + b;
                let g = gates.row_mut(row);
                let rr = rec_ru.row(b);
                let hp = h_prev.row(b);
                let rh = reset_hidden.row_mut(row);
                for j in 0..h {
                    let r = sigmoid(g[j] + rr[j]);
                    let u = sigmoid(g[h + j] + rr[h + j]);
                    g[j] = r;
                    g[h + j] = u;
                    rh[j] = r * hp[j];
                }
            }
            gemm(
                1.0,
                View::raw(reset_hidden.row_block(t * batch, batch), batch, h),
                w_h.col_view(2 * h, h),
                0.0,
                rec_n.view_mut(),
            );
            for b in 0..batch {
                let row = t * batch + b;
                let g = gates.row_mut(row);
                let rn = rec_n.row(b);
                let hp = h_prev.row(b);
                let out = hidden.row_mut(row);
                for j in 0..h {
                    let n = (g[2 * h + j] + rn[j]).tanh();
                    g[2 * h + j] = n;
                    let u = g[h + j];
                    out[j] = match self.convention {
                        GruConvention::KeepPrevious => u * hp[j] + (1.0 - u) * n,
                        GruConvention::KeepCandidate => (1.0 - u) * hp[j] + u * n,
                    };
                }
            }
            h_prev
                .as_mut_slice()
                .copy_from_slice(hidden.row_block(t * batch, batch));
        }
        GruCache {
            reverse,
            h0,
            gates,
            reset_hidden,
            hidden,
        }
    }

    /// Backpropagation through time. `d_hidden` is `dL/dh_t` for every token
    /// row; returns `dL/dx`.
    pub fn backward(
        &self,
        params: &ParamSet,
        x: &SeqBatch,
        cache: &GruCache,
        d_hidden: &Matrix,
        grads: &mut ParamSet,
    ) -> Matrix {
        let (steps, batch, h) = (x.steps, x.batch, self.hidden);
        let w_h = &params[self.w_h];
        let mut d_pre = Matrix::zeros(steps * batch, 3 * h);
        let mut d_next = Matrix::zeros(batch, h);
        let mut d_prev = Matrix::zeros(batch, h);
        let mut d_rh = Matrix::zeros(batch, h);
        let order: Vec<usize> = Self::order(steps, cache.reverse).collect();

        for (pos, &t) in order.iter().enumerate().rev() {
            let h_prev: &[f64] = if pos == 0 {
                cache.h0.as_slice()
            } else {
                cache.hidden.row_block(order[pos - 1] * batch, batch)
            };
            for b in 0..batch {
                let row = t * batch + b;
                let g = cache.gates.row(row);
                let dh_out = d_hidden.row(row);
                let dn_row = d_next.row(b);
                let dp = &mut d_prev.row_mut(b)[..];
                let dpre = d_pre.row_mut(row);
                for j in 0..h {
                    let dh = dh_out[j] + dn_row[j];
                    let (u, n) = (g[h + j], g[2 * h + j]);
                    let hp = h_prev[b * h + j];
                    let (dn, du, dhp) = match self.convention {
                        GruConvention::KeepPrevious => (dh * (1.0 - u), dh * (hp - n), dh * u),
                        GruConvention::KeepCandidate => (dh * u, dh * (n - hp), dh * (1.0 - u)),
                    };
                    dpre[2 * h + j] = dn * (1.0 - n * n);
                    dpre[h + j] = du * u * (1.0 - u);
                    dp[j] = dhp;
                }
            }
            // candidate path through the reset-scaled state
            gemm(
                1.0,
                cache.reset_hidden.block(t * batch, batch, 0, h).t(),
                d_pre.block(t * batch, batch, 2 * h, h),
                1.0,
                grads[self.w_h].block_mut(0, h, 2 * h, h),
            );
            gemm(
                1.0,
                d_pre.block(t * batch, batch, 2 * h, h),
                w_h.block(0, h, 2 * h, h).t(),
                0.0,
                d_rh.view_mut(),
            );
            for b in 0..batch {
                let row = t * batch + b;
                let g = cache.gates.row(row);
                let drh = d_rh.row(b);
                let dp = d_prev.row_mut(b);
                let dpre = d_pre.row_mut(row);
                for j in 0..h {
                    let r = g[j];
                    let hp = h_prev[b * h + j];
                    dp[j] += drh[j] * r;
                    dpre[j] = drh[j] * hp * r * (1.0 - r);
                }
            }
            // reset and update gates
            gemm(
                1.0,
                View::raw(h_prev, batch, h).t(),
                d_pre.block(t * batch, batch, 0, 2 * h),
                1.0,
                grads[self.w_h].block_mut(0, h, 0, 2 * h),
            );
            gemm(
                1.0,
                d_pre.block(t * batch, batch, 0, 2 * h),
                w_h.block(0, h, 0, 2 * h).t(),
                1.0,
                d_prev.view_mut(),
            );
            std::mem::swap(&mut d_next, &mut d_prev);
        }

        gemm(1.0, x.data.view().t(), d_pre.view(), 1.0, grads[self.w_x].view_mut());
        grads.accumulate(self.bias, &d_pre.col_sums());
        let mut dx = Matrix::zeros(steps * batch, self.inputs);
        gemm(1.0, d_pre.view(), params[self.w_x].view().t(), 0.0, dx.view_mut());
        dx
    }
}

/// Forward GRU plus an optional backward-in-time GRU; outputs are concatenated
/// per token as `[forward | backward]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiGru {
    pub forward: GruCell,
    pub backward: Option<GruCell>,
}

#[derive(Clone, Debug)]
pub struct BiGruCache {
    fwd: GruCache,
    bwd: Option<GruCache>,
}

impl BiGru {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        inputs: usize,
        hidden: usize,
        bidirectional: bool,
        convention: GruConvention,
        rng: &mut Rng,
    ) -> Self {
        let forward = GruCell::new(params, &format!("{name}.fwd"), inputs, hidden, convention, rng);
        let backward = bidirectional
            .then(|| GruCell::new(params, &format!("{name}.bwd"), inputs, hidden, convention, rng));
        BiGru { forward, backward }
    }

    pub fn output_width(&self) -> usize {
        self.forward.hidden * if self.backward.is_some() { 2 } else { 1 }
    }

    pub fn forward(&self, params: &ParamSet, x: &SeqBatch) -> Result<(SeqBatch, BiGruCache)> {
        if x.steps == 0 {
            return Err(Error::EmptySequence);
        }
        if let Some(bwd) = &self.backward {
            if bwd.hidden != self.forward.hidden {
                return Err(Error::shape(
                    "bigru",
                    (self.forward.inputs, self.forward.hidden),
                    (bwd.inputs, bwd.hidden),
                ));
            }
        }
        let fwd = self.forward.run(params, x, false);
        let bwd = self.backward.as_ref().map(|cell| cell.run(params, x, true));
        let h = self.forward.hidden;
        let out = match &bwd {
            None => fwd.hidden.clone(),
            Some(b) => {
                let mut out = Matrix::zeros(x.steps * x.batch, 2 * h);
                for r in 0..out.rows() {
                    let row = out.row_mut(r);
                    row[..h].copy_from_slice(fwd.hidden.row(r));
                    row[h..].copy_from_slice(b.hidden.row(r));
                }
                out
            }
        };
        Ok((SeqBatch::new(x.steps, x.batch, out), BiGruCache { fwd, bwd }))
    }

    pub fn backward(
        &self,
        params: &ParamSet,
        x: &SeqBatch,
        cache: &BiGruCache,
        d_out: &Matrix,
        grads: &mut ParamSet,
    ) -> Matrix {
        let h = self.forward.hidden;
        match (&self.backward, &cache.bwd) {
            (Some(cell), Some(bc)) => {
                let rows = d_out.rows();
                let mut df = Matrix::zeros(rows, h);
                let mut db = Matrix::zeros(rows, h);
                for r in 0..rows {
                    df.row_mut(r).copy_from_slice(&d_out.row(r)[..h]);
                    db.row_mut(r).copy_from_slice(&d_out.row(r)[h..]);
                }
                let mut dx = self.forward.backward(params, x, &cache.fwd, &df, grads);
                dx.add_assign(&cell.backward(params, x, bc, &db, grads));
                dx
            }
            _ => self.forward.backward(params, x, &cache.fwd, d_out, grads),
        }
    }
}
