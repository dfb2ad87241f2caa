use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{EmbeddingKind, GruConvention, HeadDepth};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    ClsMhsa,
    MeanMax,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCriterion {
    #[default]
    MacroF1,
    ValLoss,
}

/// Architecture, regularization and training recipe for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_model: usize,
    /// Residual BiGRU blocks after the initial block.
    pub blocks: usize,
    /// CLS attention layers.
    pub attn_layers: usize,
    pub heads: usize,
    pub bidirectional: bool,
    pub use_cr: bool,
    pub pooling: Pooling,
    pub head_depth: HeadDepth,
    pub dropout: f64,
    pub feature_dropout: f64,
    /// Also apply `dropout` to the attention pooling outputs.
    pub attention_dropout: bool,
    pub embedding: EmbeddingKind,
    pub gru_convention: GruConvention,
    pub cr_reduction: usize,
    pub ln_eps: f64,

    pub lr: f64,
    pub lr_min: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub label_smoothing: f64,
    pub clip_norm: f64,
    pub early_stopping: StopCriterion,
    pub warm_restarts: bool,
    pub restart_period: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 128,
            blocks: 3,
            attn_layers: 3,
            heads: 4,
            bidirectional: true,
            use_cr: true,
            pooling: Pooling::ClsMhsa,
            head_depth: HeadDepth::Deep,
            dropout: 0.2,
            feature_dropout: 0.1,
            attention_dropout: false,
            embedding: EmbeddingKind::Shared,
            gru_convention: GruConvention::KeepPrevious,
            cr_reduction: 4,
            ln_eps: 1e-5,
            lr: 8e-4,
            lr_min: 0.0,
            weight_decay: 6e-5,
            epochs: 150,
            batch_size: 32,
            patience: 18,
            label_smoothing: 0.05,
            clip_norm: 5.0,
            early_stopping: StopCriterion::MacroF1,
            warm_restarts: false,
            restart_period: 50,
        }
    }
}

impl ModelConfig {
    /// Token width `f` after the recurrent stack.
    pub fn width(&self) -> usize {
        if self.bidirectional {
            2 * self.d_model
        } else {
            self.d_model
        }
    }

    /// Width of the pooled embedding the head receives.
    pub fn pooled_width(&self) -> usize {
        match self.pooling {
            Pooling::ClsMhsa => self.width(),
            Pooling::MeanMax => 2 * self.width(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d_model == 0 {
            return bad("d_model must be positive".into());
        }
        if self.pooling == Pooling::ClsMhsa {
            if self.attn_layers == 0 {
                return bad("attn_layers must be at least 1 with cls_mhsa pooling".into());
            }
            if self.heads == 0 || !self.width().is_multiple_of(self.heads) {
                return bad(format!("width {} is not divisible by heads {}", self.width(), self.heads));
            }
        }
        if self.use_cr && (self.cr_reduction == 0 || !self.width().is_multiple_of(self.cr_reduction)) {
            return bad(format!(
                "cr_reduction {} must divide width {}",
                self.cr_reduction,
                self.width()
            ));
        }
        for (name, p) in [("dropout", self.dropout), ("feature_dropout", self.feature_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} {p} must lie in [0, 1)"));
            }
        }
        if !(0.0..0.5).contains(&self.label_smoothing) {
            return bad(format!("label_smoothing {} must lie in [0, 0.5)", self.label_smoothing));
        }
        if self.ln_eps <= 0.0 {
            return bad("ln_eps must be positive".into());
        }
        if self.lr <= 0.0 || self.lr_min < 0.0 || self.lr_min > self.lr {
            return bad(format!("need 0 <= lr_min <= lr, lr > 0 (got {} / {})", self.lr_min, self.lr));
        }
        if self.weight_decay < 0.0 || self.clip_norm <= 0.0 {
            return bad("weight_decay must be >= 0 and clip_norm > 0".into());
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        if self.warm_restarts && self.restart_period == 0 {
            return bad("restart_period must be positive".into());
        }
        Ok(())
    }
}

/// The ten model variants compared in the ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoCr,
    MeanmaxPool,
    N0,
    Unigru,
    L1,
    N2,
    Dmodel96,
    NoFeatureDropout,
    ShallowHead,
}

impl Variant {
    pub const ALL: [Variant; 10] = [
        Variant::Full,
        Variant::NoCr,
        Variant::MeanmaxPool,
        Variant::N0,
        Variant::Unigru,
        Variant::L1,
        Variant::N2,
        Variant::Dmodel96,
        Variant::NoFeatureDropout,
        Variant::ShallowHead,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoCr => "no_cr",
            Variant::MeanmaxPool => "meanmax_pool",
            Variant::N0 => "n0",
            Variant::Unigru => "unigru",
            Variant::L1 => "l1",
            Variant::N2 => "n2",
            Variant::Dmodel96 => "dmodel96",
            Variant::NoFeatureDropout => "no_feature_dropout",
            Variant::ShallowHead => "shallow_head",
        }
    }

    /// Row label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "Residual GRU+MHSA",
            Variant::NoCr => "-CR",
            Variant::MeanmaxPool => "-MHSA (mean+max)",
            Variant::N0 => "-Residual stack (N=0)",
            Variant::Unigru => "Uni-GRU (no bidi)",
            Variant::L1 => "MHSA layers = 1",
            Variant::N2 => "N=2 residual blocks",
            Variant::Dmodel96 => "d_model=96",
            Variant::NoFeatureDropout => "No feature dropout",
            Variant::ShallowHead => "Shallow head",
        }
    }

    pub fn valid_names() -> String {
        Variant::ALL.iter().map(|v| v.name()).collect::<Vec<_>>().join(", ")
    }

    /// `cfg` with exactly this variant's field changed.
    pub fn apply(self, cfg: &ModelConfig) -> ModelConfig {
        let mut c = cfg.clone();
        match self {
            Variant::Full => {}
            Variant::NoCr => c.use_cr = false,
            Variant::MeanmaxPool => c.pooling = Pooling::MeanMax,
            Variant::N0 => c.blocks = 0,
            Variant::Unigru => c.bidirectional = false,
            Variant::L1 => c.attn_layers = 1,
            Variant::N2 => c.blocks = 2,
            Variant::Dmodel96 => c.d_model = 96,
            Variant::NoFeatureDropout => c.feature_dropout = 0.0,
            Variant::ShallowHead => c.head_depth = HeadDepth::Shallow,
        }
        c
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::Config(format!("unknown variant '{s}'; valid variants: {}", Variant::valid_names()))
            })
    }
}

/// Applies a named ablation to a configuration.
pub fn apply_ablation(cfg: &ModelConfig, variant: &str) -> Result<ModelConfig> {
    Ok(variant.parse::<Variant>()?.apply(cfg))
}
