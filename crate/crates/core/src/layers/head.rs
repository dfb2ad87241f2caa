use serde::{Deserialize, Serialize};

use super::seq::{apply_mask, dropout_mask};
use super::{LayerNorm, LinearLayer, ParamSet};
use crate::numkit::{relu, LayerNormCache, Matrix, Rng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadDepth {
    /// `o = W₂ relu(W₁ LN(z))` with dropout on the hidden layer.
    #[default]
    Deep,
    /// `o = W z + b`.
    Shallow,
}

/// Prediction head mapping a pooled embedding to one logit per sample.
#[derive(Clone, Debug, PartialEq)]
pub enum Head {
    Deep {
        norm: LayerNorm,
        hidden: LinearLayer,
        out: LinearLayer,
        dropout: f64,
    },
    Shallow {
        out: LinearLayer,
    },
}

#[derive(Clone, Debug)]
pub struct HeadCache {
    /// The representation the head's linear layers see.
    pub features: Matrix,
    norm: Option<LayerNormCache>,
    hidden: Option<Matrix>,
    mask: Option<Vec<f64>>,
}

impl Head {
    pub fn new(
        params: &mut ParamSet,
        depth: HeadDepth,
        inputs: usize,
        dropout: f64,
        eps: f64,
        rng: &mut Rng,
    ) -> Self {
        match depth {
            HeadDepth::Deep => {
                let hid = (inputs / 2).max(1);
                Head::Deep {
                    norm: LayerNorm::new(params, "head.norm", inputs, eps),
                    hidden: LinearLayer::new(params, "head.w1", inputs, hid, true, rng),
                    out: LinearLayer::new(params, "head.w2", hid, 1, true, rng),
                    dropout,
                }
            }
            HeadDepth::Shallow => Head::Shallow {
                out: LinearLayer::new(params, "head.w", inputs, 1, true, rng),
            },
        }
    }

    /// Normalized embedding (deep head) or the raw input (shallow head).
    pub fn features(&self, params: &ParamSet, z: &Matrix) -> Matrix {
        match self {
            Head::Deep { norm, .. } => norm.forward(params, z).0,
            Head::Shallow { .. } => z.clone(),
        }
    }

    pub fn forward(&self, params: &ParamSet, z: &Matrix, rng: Option<&mut Rng>) -> (Vec<f64>, HeadCache) {
        match self {
            Head::Deep {
                norm,
                hidden,
                out,
                dropout,
            } => {
                let (features, nc) = norm.forward(params, z);
                let mut a = hidden.forward(params, &features);
                a.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
                let mask = match rng {
                    Some(r) if *dropout > 0.0 => {
                        let m = dropout_mask(a.len(), *dropout, r);
                        Some(m)
                    }
                    _ => None,
                };
                let mut dropped = a.clone();
                if let Some(m) = &mask {
                    apply_mask(dropped.as_mut_slice(), m);
                }
                let logits = out.forward(params, &dropped).into_vec();
                (
                    logits,
                    HeadCache {
                        features,
                        norm: Some(nc),
                        hidden: Some(a),
                        mask,
                    },
                )
            }
            Head::Shallow { out } => (
                out.forward(params, z).into_vec(),
                HeadCache {
                    features: z.clone(),
                    norm: None,
                    hidden: None,
                    mask: None,
                },
            ),
        }
    }

    pub fn backward(&self, params: &ParamSet, cache: &HeadCache, d_logits: &[f64], grads: &mut ParamSet) -> Matrix {
        let d = Matrix::from_vec(d_logits.len(), 1, d_logits.to_vec()).expect("finite logit gradient");
        match self {
            Head::Deep { norm, hidden, out, .. } => {
                let a = cache.hidden.as_ref().expect("deep head cache");
                let mut dropped = a.clone();
                if let Some(m) = &cache.mask {
                    apply_mask(dropped.as_mut_slice(), m);
                }
                let mut da = out.backward(params, &dropped, &d, grads);
                if let Some(m) = &cache.mask {
                    apply_mask(da.as_mut_slice(), m);
                }
                for (g, v) in da.as_mut_slice().iter_mut().zip(a.as_slice()) {
                    if *v <= 0.0 {
                        *g = 0.0;
                    }
                }
                let dn = hidden.backward(params, &cache.features, &da, grads);
                norm.backward(params, cache.norm.as_ref().expect("deep head norm"), &dn, grads)
            }
            Head::Shallow { out } => out.backward(params, &cache.features, &d, grads),
        }
    }
}
