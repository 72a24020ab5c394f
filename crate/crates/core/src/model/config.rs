use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::hgn::DEFAULT_HISTORY_CAP;
use crate::store::ModelKind;

/// Training hyperparameters. Defaults follow the reference protocol:
/// α = 100, k = 5, batch 64, 20 epochs, learning rate 0.5 decayed to zero,
/// gradient clipping at norm 5.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub dim: usize,
    /// Attention heads β (HGN only).
    pub heads: usize,
    /// Negative samples per positive example.
    pub negatives: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub clip_norm: f64,
    pub seed: u64,
    pub history_cap: usize,
    /// Single-threaded, bit-reproducible training when true.
    pub deterministic: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Drem,
            dim: 100,
            heads: 2,
            negatives: 5,
            batch_size: 64,
            epochs: 20,
            initial_lr: 0.5,
            clip_norm: 5.0,
            seed: 0,
            history_cap: DEFAULT_HISTORY_CAP,
            deterministic: true,
        }
    }
}

impl ModelConfig {
    pub const KEYS: [&'static str; 11] = [
        "model_kind",
        "dim",
        "heads",
        "negatives",
        "batch_size",
        "epochs",
        "initial_lr",
        "clip_norm",
        "seed",
        "history_cap",
        "deterministic",
    ];

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_owned()));
        if self.dim == 0 || self.heads == 0 {
            return bad("dim and heads must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be at least 1");
        }
        if !(self.initial_lr >= 0.0 && self.initial_lr.is_finite()) {
            return bad("initial_lr must be a nonnegative number");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        if self.history_cap == 0 {
            return bad("history_cap must be at least 1");
        }
        Ok(())
    }

    /// Overrides fields from a key=value file; unknown keys are rejected.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        if let Some(key) = kv.keys().find(|k| !Self::KEYS.contains(k)) {
            return Err(Error::InvalidArgument(format!("unknown config key `{key}`")));
        }
        if let Some(kind) = kv.get("model_kind") {
            self.kind = ModelKind::parse(kind)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind `{kind}`")))?;
        }
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = kv.parse_value(stringify!($field))? {
                    self.$field = v;
                })*
            };
        }
        set!(dim, heads, negatives, batch_size, epochs, initial_lr, clip_norm, seed, history_cap, deterministic);
        Ok(())
    }

    /// Serializes as a key=value file accepted by [`ModelConfig::apply`].
    pub fn to_key_values(&self) -> String {
        format!(
            "model_kind = {}\ndim = {}\nheads = {}\nnegatives = {}\nbatch_size = {}\nepochs = {}\ninitial_lr = {}\nclip_norm = {}\nseed = {}\nhistory_cap = {}\ndeterministic = {}\n",
            self.kind.name(),
            self.dim,
            self.heads,
            self.negatives,
            self.batch_size,
            self.epochs,
            self.initial_lr,
            self.clip_norm,
            self.seed,
            self.history_cap,
            self.deterministic
        )
    }
}
