use super::seq::{apply_mask, dropout_mask};
use super::{LayerNorm, LinearLayer, ParamId, ParamSet, SeqBatch};
use crate::error::{Error, Result};
use crate::numkit::{softmax_in_place, LayerNormCache, Matrix, Rng};

/// One CLS-query attention layer: `Q = LN_q(cls) W_Q`, `K = LN_kv(Ĥ) W_K`,
/// `V = LN_kv(Ĥ) W_V`, `cls ← cls + softmax(Q Kᵀ / √d_k) V` per head.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionLayer {
    pub norm_query: LayerNorm,
    pub norm_tokens: LayerNorm,
    pub w_q: LinearLayer,
    pub w_k: LinearLayer,
    pub w_v: LinearLayer,
}

/// Learnable CLS token refined by `L` attention layers over a token sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct ClsAttentionPool {
    pub cls: ParamId,
    pub layers: Vec<AttentionLayer>,
    pub heads: usize,
    pub width: usize,
    /// Dropout on each layer's attended output before the residual add.
    pub dropout: f64,
}

#[derive(Clone, Debug)]
struct LayerCache {
    q_norm: Matrix,
    q_norm_cache: LayerNormCache,
    tok_norm: Matrix,
    tok_norm_cache: LayerNormCache,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    /// `batch × heads × steps` attention weights.
    weights: Vec<f64>,
    mask: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct AttentionCache {
    layers: Vec<LayerCache>,
}

impl AttentionCache {
    /// Attention weights of layer `l` for sample `b`, head `j`.
    pub fn weights(&self, l: usize, b: usize, j: usize, heads: usize, steps: usize) -> &[f64] {
        let base = (b * heads + j) * steps;
        &self.layers[l].weights[base..base + steps]
    }
}

impl ClsAttentionPool {
    pub fn new(
        params: &mut ParamSet,
        width: usize,
        layers: usize,
        heads: usize,
        dropout: f64,
        eps: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if heads == 0 || !width.is_multiple_of(heads) {
            return Err(Error::config(format!(
                "attention width {width} is not divisible by {heads} heads"
            )));
        }
        if layers == 0 {
            return Err(Error::config("attention pooling needs at least one layer"));
        }
        let mut cls = Matrix::zeros(1, width);
        cls.as_mut_slice().iter_mut().for_each(|v| *v = rng.normal() * 0.02);
        let cls = params.add("pool.cls", cls);
        let layers = (0..layers)
            .map(|l| AttentionLayer {
                norm_query: LayerNorm::new(params, &format!("pool{l}.norm_q"), width, eps),
                norm_tokens: LayerNorm::new(params, &format!("pool{l}.norm_kv"), width, eps),
                w_q: LinearLayer::new(params, &format!("pool{l}.w_q"), width, width, false, rng),
                w_k: LinearLayer::new(params, &format!("pool{l}.w_k"), width, width, false, rng),
                w_v: LinearLayer::new(params, &format!("pool{l}.w_v"), width, width, false, rng),
            })
            .collect();
        Ok(ClsAttentionPool {
            cls,
            layers,
            heads,
            width,
            dropout,
        })
    }

    pub fn head_width(&self) -> usize {
        self.width / self.heads
    }

    pub fn forward(
        &self,
        params: &ParamSet,
        h: &SeqBatch,
        mut rng: Option<&mut Rng>,
    ) -> (Matrix, AttentionCache) {
        let (steps, batch) = (h.steps, h.batch);
        assert_eq!(h.width(), self.width, "attention pool width");
        let dk = self.head_width();
        let scale = 1.0 / (dk as f64).sqrt();
        let mut cls = Matrix::zeros(batch, self.width);
        for b in 0..batch {
            cls.row_mut(b).copy_from_slice(params[self.cls].as_slice());
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut scores = vec![0.0; steps];
        for layer in &self.layers {
            let (q_norm, q_norm_cache) = layer.norm_query.forward(params, &cls);
            let (tok_norm, tok_norm_cache) = layer.norm_tokens.forward(params, &h.data);
            let q = layer.w_q.forward(params, &q_norm);
            let k = layer.w_k.forward(params, &tok_norm);
            let v = layer.w_v.forward(params, &tok_norm);
            let mut weights = vec![0.0; batch * self.heads * steps];
            let mut attended = Matrix::zeros(batch, self.width);
            for b in 0..batch {
                let qb = q.row(b);
                for j in 0..self.heads {
                    let cols = j * dk..(j + 1) * dk;
                    let qh = &qb[cols.clone()];
                    for (t, s) in scores.iter_mut().enumerate() {
                        let kt = &k.row(t * batch + b)[cols.clone()];
                        *s = qh.iter().zip(kt).map(|(a, c)| a * c).sum::<f64>() * scale;
                    }
                    softmax_in_place(&mut scores);
                    let out = &mut attended.row_mut(b)[cols.clone()];
                    for (t, a) in scores.iter().enumerate() {
                        let vt = &v.row(t * batch + b)[cols.clone()];
                        for (o, vv) in out.iter_mut().zip(vt) {
                            *o += a * vv;
                        }
                    }
                    let base = (b * self.heads + j) * steps;
                    weights[base..base + steps].copy_from_slice(&scores);
                }
            }
            let mask = match rng.as_deref_mut() {
                Some(r) if self.dropout > 0.0 => {
                    let m = dropout_mask(attended.len(), self.dropout, r);
                    apply_mask(attended.as_mut_slice(), &m);
                    Some(m)
                }
                _ => None,
            };
            cls.add_assign(&attended);
            caches.push(LayerCache {
                q_norm,
                q_norm_cache,
                tok_norm,
                tok_norm_cache,
                q,
                k,
                v,
                weights,
                mask,
            });
        }
        (cls, AttentionCache { layers: caches })
    }

    /// Returns `dL/dĤ`; the CLS token's gradient is accumulated into `grads`.
    pub fn backward(
        &self,
        params: &ParamSet,
        h: &SeqBatch,
        cache: &AttentionCache,
        d_out: &Matrix,
        grads: &mut ParamSet,
    ) -> Matrix {
        let (steps, batch) = (h.steps, h.batch);
        let dk = self.head_width();
        let scale = 1.0 / (dk as f64).sqrt();
        let mut d_cls = d_out.clone();
        let mut d_h = Matrix::zeros(steps * batch, self.width);
        let mut d_w = vec![0.0; steps];
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            let mut d_att = d_cls.clone();
            if let Some(m) = &lc.mask {
                apply_mask(d_att.as_mut_slice(), m);
            }
            let mut dq = Matrix::zeros(batch, self.width);
            let mut dk_m = Matrix::zeros(steps * batch, self.width);
            let mut dv = Matrix::zeros(steps * batch, self.width);
            for b in 0..batch {
                for j in 0..self.heads {
                    let cols = j * dk..(j + 1) * dk;
                    let base = (b * self.heads + j) * steps;
                    let a = &lc.weights[base..base + steps];
                    let go = &d_att.row(b)[cols.clone()];
                    for t in 0..steps {
                        let row = t * batch + b;
                        let vt = &lc.v.row(row)[cols.clone()];
                        d_w[t] = go.iter().zip(vt).map(|(g, v)| g * v).sum();
                        for (d, g) in dv.row_mut(row)[cols.clone()].iter_mut().zip(go) {
                            *d += a[t] * g;
                        }
                    }
                    let dot: f64 = a.iter().zip(&d_w).map(|(x, y)| x * y).sum();
                    let qh = &lc.q.row(b)[cols.clone()];
                    for t in 0..steps {
                        let ds = a[t] * (d_w[t] - dot) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        let row = t * batch + b;
                        let kt = &lc.k.row(row)[cols.clone()];
                        for (d, kv) in dq.row_mut(b)[cols.clone()].iter_mut().zip(kt) {
                            *d += ds * kv;
                        }
                        for (d, qv) in dk_m.row_mut(row)[cols.clone()].iter_mut().zip(qh) {
                            *d += ds * qv;
                        }
                    }
                }
            }
            let mut d_tok = layer.w_k.backward(params, &lc.tok_norm, &dk_m, grads);
            d_tok.add_assign(&layer.w_v.backward(params, &lc.tok_norm, &dv, grads));
            d_h.add_assign(&layer.norm_tokens.backward(params, &lc.tok_norm_cache, &d_tok, grads));
            let dqn = layer.w_q.backward(params, &lc.q_norm, &dq, grads);
            let d_cls_q = layer.norm_query.backward(params, &lc.q_norm_cache, &dqn, grads);
            d_cls.add_assign(&d_cls_q);
        }
        grads.accumulate(self.cls, &d_cls.col_sums());
        d_h
    }
}
