use crate::error::{Error, Result};
use crate::layers::{
    feature_dropout, feature_dropout_backward, meanmax_backward, meanmax_pool, AttentionCache, ChannelCache,
    ChannelReweight, ClsAttentionPool, ColumnEmbedding, Head, HeadCache, InitialBlock, InitialBlockCache,
    ParamSet, ResidualBlock, ResidualBlockCache, SeqBatch,
};
use crate::numkit::{sigmoid, Matrix, Rng};

use super::config::{ModelConfig, Pooling};

/// Rows processed per forward pass at inference time.
const EVAL_CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq)]
enum Pool {
    Attention(ClsAttentionPool),
    MeanMax,
}

enum PoolCache {
    Attention(AttentionCache),
    MeanMax(Vec<usize>),
}

/// Everything the backward pass needs from one training forward pass.
pub struct Tape {
    x: Matrix,
    embedded: SeqBatch,
    fd_mask: Option<Vec<f64>>,
    initial: InitialBlockCache,
    /// Input of each residual block, then the stack output.
    states: Vec<SeqBatch>,
    blocks: Vec<ResidualBlockCache>,
    channel: Option<(SeqBatch, ChannelCache)>,
    pool: PoolCache,
    head: HeadCache,
}

/// The assembled classifier: embedding, recurrent stack, channel reweighting,
/// pooling and head, with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: ModelConfig,
    inputs: usize,
    params: ParamSet,
    embed: ColumnEmbedding,
    initial: InitialBlock,
    blocks: Vec<ResidualBlock>,
    channel: Option<ChannelReweight>,
    pool: Pool,
    head: Head,
}

impl Network {
    /// Builds a freshly initialized network for `inputs` encoded columns.
    pub fn new(config: &ModelConfig, inputs: usize, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        if inputs == 0 {
            return Err(Error::EmptySequence);
        }
        let c = config;
        let mut ps = ParamSet::new();
        let embed = ColumnEmbedding::new(&mut ps, c.embedding, inputs, c.d_model, rng);
        let initial = InitialBlock::new(&mut ps, c.d_model, c.bidirectional, c.gru_convention, c.ln_eps, rng);
        let f = c.width();
        let blocks = (0..c.blocks)
            .map(|i| {
                ResidualBlock::new(&mut ps, i, f, c.bidirectional, c.gru_convention, c.dropout, c.ln_eps, rng)
            })
            .collect();
        let channel = if c.use_cr {
            Some(ChannelReweight::new(&mut ps, f, c.cr_reduction, rng)?)
        } else {
            None
        };
        let pool = match c.pooling {
            Pooling::ClsMhsa => {
                let p = if c.attention_dropout { c.dropout } else { 0.0 };
                Pool::Attention(ClsAttentionPool::new(&mut ps, f, c.attn_layers, c.heads, p, c.ln_eps, rng)?)
            }
            Pooling::MeanMax => Pool::MeanMax,
        };
        let head = Head::new(&mut ps, c.head_depth, c.pooled_width(), c.dropout, c.ln_eps, rng);
        Ok(Network {
            config: config.clone(),
            inputs,
            params: ps,
            embed,
            initial,
            blocks,
            channel,
            pool,
            head,
        })
    }

    /// Rebuilds a network from a configuration and stored parameters.
    pub fn from_params(config: &ModelConfig, inputs: usize, params: ParamSet) -> Result<Self> {
        let mut net = Network::new(config, inputs, &mut Rng::new(0))?;
        if !net.params.same_layout(&params) {
            return Err(Error::Artifact("parameter layout does not match the configuration".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.scalar_count()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.inputs {
            return Err(Error::Schema {
                expected: self.inputs,
                got: x.cols(),
            });
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Forward pass over a `batch × inputs` matrix. With `rng` set, every
    /// dropout site is active and draws from it in a fixed order.
    pub fn forward_batch(&self, x: &Matrix, mut rng: Option<&mut Rng>) -> Result<(Vec<f64>, Tape)> {
        self.check_input(x)?;
        let ps = &self.params;
        let mut embedded = self.embed.forward(ps, x);
        let fd_p = self.config.feature_dropout;
        let fd_mask = feature_dropout(&mut embedded, fd_p, rng.as_deref_mut())?;
        let (mut h, initial) = self.initial.forward(ps, &embedded)?;
        let mut states = Vec::with_capacity(self.blocks.len() + 1);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (next, cache) = block.forward(ps, &h, rng.as_deref_mut())?;
            states.push(h);
            caches.push(cache);
            h = next;
        }
        let channel = match &self.channel {
            Some(cr) => {
                let (out, cache) = cr.forward(ps, &h);
                Some((std::mem::replace(&mut h, out), cache))
            }
            None => None,
        };
        let (z, pool) = match &self.pool {
            Pool::Attention(att) => {
                let (z, cache) = att.forward(ps, &h, rng.as_deref_mut());
                (z, PoolCache::Attention(cache))
            }
            Pool::MeanMax => {
                let (z, arg) = meanmax_pool(&h);
                (z, PoolCache::MeanMax(arg))
            }
        };
        states.push(h);
        let (logits, head) = self.head.forward(ps, &z, rng);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logit".into()));
        }
        let tape = Tape {
            x: x.clone(),
            embedded,
            fd_mask,
            initial,
            states,
            blocks: caches,
            channel,
            pool,
            head,
        };
        Ok((logits, tape))
    }

    /// Accumulates `dL/dθ` into `grads` given `dL/dlogit` for each sample.
    pub fn backward(&self, tape: &Tape, d_logits: &[f64], grads: &mut ParamSet) {
        let ps = &self.params;
        let dz = self.head.backward(ps, &tape.head, d_logits, grads);
        let stack_out = tape.states.last().expect("stack output");
        let mut dh = match (&self.pool, &tape.pool) {
            (Pool::Attention(att), PoolCache::Attention(c)) => att.backward(ps, stack_out, c, &dz, grads),
            (Pool::MeanMax, PoolCache::MeanMax(arg)) => meanmax_backward(stack_out, arg, &dz),
            _ => unreachable!("pool cache mismatch"),
        };
        if let (Some(cr), Some((input, cache))) = (&self.channel, &tape.channel) {
            dh = cr.backward(ps, input, cache, &dh, grads);
        }
        for (i, block) in self.blocks.iter().enumerate().rev() {
            dh = block.backward(ps, &tape.states[i], &tape.blocks[i], &dh, grads);
        }
        let de = self.initial.backward(ps, &tape.embedded, &tape.initial, &dh, grads);
        let mut de = SeqBatch::new(tape.embedded.steps, tape.embedded.batch, de);
        if let Some(mask) = &tape.fd_mask {
            feature_dropout_backward(&mut de, mask);
        }
        self.embed.backward(&tape.x, &de, grads);
    }

    /// Eval-mode logits for every row of `x`.
    pub fn logits(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut out = Vec::with_capacity(x.rows());
        for start in (0..x.rows()).step_by(EVAL_CHUNK) {
            let n = EVAL_CHUNK.min(x.rows() - start);
            let chunk = Matrix::from_vec(n, x.cols(), x.row_block(start, n).to_vec())?;
            out.extend(self.forward_batch(&chunk, None)?.0);
        }
        Ok(out)
    }

    /// Eval-mode probabilities for every row of `x`.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.logits(x)?.into_iter().map(sigmoid).collect())
    }

    /// Probability for a single encoded row. `training` enables dropout and
    /// then requires `rng`.
    pub fn forward(&self, x: &[f64], training: bool, rng: Option<&mut Rng>) -> Result<f64> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec()).map_err(|_| Error::NonFinite("network input".into()))?;
        let rng = if training {
            Some(rng.ok_or_else(|| Error::config("training mode needs a random source"))?)
        } else {
            None
        };
        let (logits, _) = self.forward_batch(&m, rng)?;
        Ok(sigmoid(logits[0]))
    }

    /// Penultimate embeddings, one row per input row.
    pub fn penultimate(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut rows = Vec::with_capacity(x.rows() * self.config.pooled_width());
        for start in (0..x.rows()).step_by(EVAL_CHUNK) {
            let n = EVAL_CHUNK.min(x.rows() - start);
            let chunk = Matrix::from_vec(n, x.cols(), x.row_block(start, n).to_vec())?;
            let (_, tape) = self.forward_batch(&chunk, None)?;
            rows.extend_from_slice(tape.head.features.as_slice());
        }
        Matrix::from_vec(x.rows(), self.config.pooled_width(), rows)
    }

    /// Channel gates of the first sample of `x` (for inspection).
    pub fn channel_gates(&self, x: &Matrix) -> Result<Option<Matrix>> {
        let (_, tape) = self.forward_batch(x, None)?;
        Ok(tape.channel.map(|(_, c)| c.gates))
    }
}
