use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Denominator used inside the attention softmax.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// `QK^T / sqrt(d_model)`.
    #[default]
    SqrtDModel,
    /// `QK^T / sqrt(d_k)`, the common implementation choice.
    SqrtDK,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    #[serde(default)]
    pub scale_mode: ScaleMode,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ModelConfig {
    /// The toy configuration used for fixtures: 4 layers, 8 heads, `d_model = 64`.
    fn default() -> Self {
        Self {
            n_layers: 4,
            n_heads: 8,
            d_model: 64,
            d_ff: 256,
            scale_mode: ScaleMode::SqrtDModel,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Config with `d_ff = 4 * d_model`, default scale mode and seed 0.
    pub fn new(n_layers: usize, n_heads: usize, d_model: usize) -> Result<Self> {
        let config = Self {
            n_layers,
            n_heads,
            d_model,
            d_ff: 4 * d_model,
            scale_mode: ScaleMode::default(),
            seed: 0,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_scale_mode(mut self, scale_mode: ScaleMode) -> Self {
        self.scale_mode = scale_mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_model", self.d_model),
            ("d_ff", self.d_ff),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }

    /// Per-head width `d_q = d_k = d_v = d_model / n_heads`.
    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn attention_scale(&self) -> f64 {
        match self.scale_mode {
            ScaleMode::SqrtDModel => (self.d_model as f64).sqrt(),
            ScaleMode::SqrtDK => (self.d_head() as f64).sqrt(),
        }
    }
}
