use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model hyperparameters. Field names follow the architecture's roles:
/// `exercise_count` is the vocabulary size e, `window_len` the sequence
/// length k, `model_dim` the latent width d, `head_count` the number of
/// attention heads h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub exercise_count: usize,
    pub window_len: usize,
    pub model_dim: usize,
    pub head_count: usize,
    /// Inner width of the feed-forward sublayer; defaults to `model_dim`.
    #[serde(default)]
    pub ffn_dim: usize,
    /// Encoder/decoder block count; the reference architecture uses 1.
    #[serde(default = "one")]
    pub block_count: usize,
    #[serde(default)]
    pub dropout_rate: f64,
    /// Scale attention scores by 1/sqrt(d) instead of 1/sqrt(d/h).
    #[serde(default)]
    pub scale_full_d: bool,
}

fn one() -> usize {
    1
}

impl ModelConfig {
    pub fn new(
        exercise_count: usize,
        window_len: usize,
        model_dim: usize,
        head_count: usize,
    ) -> Result<Self> {
        let cfg = Self {
            exercise_count,
            window_len,
            model_dim,
            head_count,
            ffn_dim: model_dim,
            block_count: 1,
            dropout_rate: 0.0,
            scale_full_d: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_ffn_dim(mut self, ffn_dim: usize) -> Self {
        self.ffn_dim = ffn_dim;
        self
    }

    pub fn with_blocks(mut self, block_count: usize) -> Self {
        self.block_count = block_count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.exercise_count == 0 {
            return Err(Error::InvalidConfig("exercise_count must be >= 1".into()));
        }
        if self.window_len == 0 {
            return Err(Error::InvalidConfig("window_len must be >= 1".into()));
        }
        if self.model_dim == 0 || self.head_count == 0 {
            return Err(Error::InvalidConfig(
                "model_dim and head_count must be >= 1".into(),
            ));
        }
        if self.model_dim % self.head_count != 0 {
            return Err(Error::InvalidConfig(format!(
                "head_count {} must divide model_dim {}",
                self.head_count, self.model_dim
            )));
        }
        if self.ffn_dim == 0 {
            return Err(Error::InvalidConfig("ffn_dim must be >= 1".into()));
        }
        if self.block_count == 0 {
            return Err(Error::InvalidConfig("block_count must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout_rate {} must lie in [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Width of one attention head.
    pub fn head_dim(&self) -> usize {
        self.model_dim / self.head_count
    }

    /// Denominator used to scale attention scores.
    pub fn score_scale_dim(&self) -> usize {
        if self.scale_full_d {
            self.model_dim
        } else {
            self.head_dim()
        }
    }
}
