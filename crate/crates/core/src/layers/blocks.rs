use super::gru::BiGruCache;
use super::seq::{apply_mask, dropout_mask};
use super::{BiGru, GruConvention, LayerNorm, LinearLayer, ParamSet, SeqBatch};
use crate::error::{Error, Result};
use crate::numkit::{LayerNormCache, Matrix, Rng};

/// `H⁰ = LN(BiGRU(E) + Proj(E))`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialBlock {
    pub bigru: BiGru,
    pub proj: LinearLayer,
    pub norm: LayerNorm,
}

#[derive(Clone, Debug)]
pub struct InitialBlockCache {
    gru: BiGruCache,
    norm: LayerNormCache,
}

impl InitialBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &mut ParamSet,
        d_model: usize,
        bidirectional: bool,
        convention: GruConvention,
        eps: f64,
        rng: &mut Rng,
    ) -> Self {
        let bigru = BiGru::new(params, "initial.bigru", d_model, d_model, bidirectional, convention, rng);
        let f = bigru.output_width();
        let proj = LinearLayer::new(params, "initial.proj", d_model, f, true, rng);
        let norm = LayerNorm::new(params, "initial.norm", f, eps);
        InitialBlock { bigru, proj, norm }
    }

    pub fn forward(&self, params: &ParamSet, e: &SeqBatch) -> Result<(SeqBatch, InitialBlockCache)> {
        let (g, gru) = self.bigru.forward(params, e)?;
        let mut sum = self.proj.forward(params, &e.data);
        sum.add_assign(&g.data);
        let (out, norm) = self.norm.forward(params, &sum);
        Ok((SeqBatch::new(e.steps, e.batch, out), InitialBlockCache { gru, norm }))
    }

    pub fn backward(
        &self,
        params: &ParamSet,
        e: &SeqBatch,
        cache: &InitialBlockCache,
        d_out: &Matrix,
        grads: &mut ParamSet,
    ) -> Matrix {
        let d_sum = self.norm.backward(params, &cache.norm, d_out, grads);
        let mut de = self.proj.backward(params, &e.data, &d_sum, grads);
        de.add_assign(&self.bigru.backward(params, e, &cache.gru, &d_sum, grads));
        de
    }
}

/// `H = LN(H_in + Dropout(BiGRU(H_in)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBlock {
    pub bigru: BiGru,
    pub norm: LayerNorm,
    pub dropout: f64,
}

#[derive(Clone, Debug)]
pub struct ResidualBlockCache {
    gru: BiGruCache,
    mask: Option<Vec<f64>>,
    norm: LayerNormCache,
}

impl ResidualBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &mut ParamSet,
        index: usize,
        width: usize,
        bidirectional: bool,
        convention: GruConvention,
        dropout: f64,
        eps: f64,
        rng: &mut Rng,
    ) -> Self {
        let hidden = if bidirectional { width / 2 } else { width };
        let name = format!("block{index}");
        let bigru = BiGru::new(params, &format!("{name}.bigru"), width, hidden, bidirectional, convention, rng);
        let norm = LayerNorm::new(params, &format!("{name}.norm"), width, eps);
        ResidualBlock { bigru, norm, dropout }
    }

    pub fn forward(
        &self,
        params: &ParamSet,
        h_in: &SeqBatch,
        rng: Option<&mut Rng>,
    ) -> Result<(SeqBatch, ResidualBlockCache)> {
        if self.bigru.output_width() != h_in.width() || self.bigru.forward.inputs != h_in.width() {
            return Err(Error::shape(
                "residual_bigru_block",
                (h_in.steps * h_in.batch, h_in.width()),
                (self.bigru.forward.inputs, self.bigru.output_width()),
            ));
        }
        let (mut g, gru) = self.bigru.forward(params, h_in)?;
        let mask = match rng {
            Some(rng) if self.dropout > 0.0 => {
                let m = dropout_mask(g.data.len(), self.dropout, rng);
                apply_mask(g.data.as_mut_slice(), &m);
                Some(m)
            }
            _ => None,
        };
        g.data.add_assign(&h_in.data);
        let (out, norm) = self.norm.forward(params, &g.data);
        Ok((SeqBatch::new(h_in.steps, h_in.batch, out), ResidualBlockCache { gru, mask, norm }))
    }

    pub fn backward(
        &self,
        params: &ParamSet,
        h_in: &SeqBatch,
        cache: &ResidualBlockCache,
        d_out: &Matrix,
        grads: &mut ParamSet,
    ) -> Matrix {
        let d_sum = self.norm.backward(params, &cache.norm, d_out, grads);
        let mut d_gru = d_sum.clone();
        if let Some(m) = &cache.mask {
            apply_mask(d_gru.as_mut_slice(), m);
        }
        let mut dx = self.bigru.backward(params, h_in, &cache.gru, &d_gru, grads);
        dx.add_assign(&d_sum);
        dx
    }
}
