//! Differentiable building blocks. Every layer keeps its weights in a shared
//! [`ParamSet`] and exposes a batched forward pass that returns a cache, plus
//! a backward pass that accumulates parameter gradients into a second
//! `ParamSet` of the same layout.

mod attention;
mod blocks;
mod channel;
mod embed;
mod gru;
mod head;
mod linear;
mod norm;
mod params;
mod pooling;
mod seq;

pub use attention::{AttentionCache, AttentionLayer, ClsAttentionPool};
pub use blocks::{InitialBlock, InitialBlockCache, ResidualBlock, ResidualBlockCache};
pub use channel::{ChannelCache, ChannelReweight};
pub use embed::{feature_dropout, ColumnEmbedding, EmbeddingKind};
pub(crate) use embed::feature_dropout_backward;
pub use gru::{BiGru, BiGruCache, GruCache, GruCell, GruConvention};
pub use head::{Head, HeadCache, HeadDepth};
pub use linear::LinearLayer;
pub use norm::LayerNorm;
pub use params::{ParamId, ParamSet};
pub use pooling::{meanmax_backward, meanmax_pool};
pub use seq::{dropout_mask, SeqBatch};
