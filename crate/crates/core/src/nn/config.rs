use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Gated blocks: `t * relu(x W_H + b_H) + (1 - t) * x`.
    #[default]
    Highway,
    /// Ungated LeakyReLU blocks of the same depth and width, for ablation.
    Plain,
}

impl Architecture {
    pub(crate) fn code(self) -> u32 {
        match self {
            Architecture::Highway => 0,
            Architecture::Plain => 1,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Architecture::Highway),
            1 => Some(Architecture::Plain),
            _ => None,
        }
    }
}

pub const LEAKY_SLOPE: f64 = 0.01;

/// Network shape and optimizer settings.
///
/// `input_dim = 0` means "take it from the data" when the config is handed
/// to a runner; [`HighwayNetConfig::validate`] requires it to be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HighwayNetConfig {
    pub architecture: Architecture,
    pub input_dim: usize,
    /// Chosen so the default synthetic model serializes to about 1,078 KB.
    pub hidden_width: usize,
    pub n_blocks: usize,
    pub gate_bias_init: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub early_stop_patience: usize,
    pub init_seed: u64,
}

impl Default for HighwayNetConfig {
    fn default() -> Self {
        HighwayNetConfig {
            architecture: Architecture::Highway,
            input_dim: 0,
            hidden_width: 90,
            n_blocks: 8,
            gate_bias_init: -1.0,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            early_stop_patience: 10,
            init_seed: 0,
        }
    }
}

impl HighwayNetConfig {
    pub fn with_input_dim(mut self, input_dim: usize) -> Self {
        self.input_dim = input_dim;
        self
    }

    /// Fills in `input_dim` from data, rejecting an explicit mismatch.
    pub fn resolved(&self, data_width: usize) -> Result<Self> {
        match self.input_dim {
            0 => Ok(self.clone().with_input_dim(data_width)),
            d if d == data_width => Ok(self.clone()),
            d => Err(Error::Config(format!(
                "network input_dim {d} does not match data width {data_width}"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.input_dim == 0 {
            return bad("input_dim must be positive");
        }
        if self.hidden_width == 0 {
            return bad("hidden_width must be positive");
        }
        if self.n_blocks == 0 {
            return bad("n_blocks must be positive");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("Adam betas must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0) || !(self.epsilon > 0.0) {
            return bad("learning_rate and epsilon must be positive");
        }
        Ok(())
    }
}
