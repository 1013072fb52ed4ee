use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which interaction branches an Euler layer evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Full,
    ExplicitOnly,
    ImplicitOnly,
}

impl Mode {
    pub fn explicit(self) -> bool {
        self != Mode::ImplicitOnly
    }

    pub fn implicit(self) -> bool {
        self != Mode::ExplicitOnly
    }
}

fn default_embed_dim() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub num_fields: usize,
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    /// Number of order vectors in each Euler interaction layer.
    pub layer_widths: Vec<usize>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub normalization: bool,
}

impl ModelConfig {
    pub fn new(num_fields: usize, embed_dim: usize, layer_widths: Vec<usize>) -> Self {
        Self {
            num_fields,
            embed_dim,
            layer_widths,
            mode: Mode::Full,
            normalization: false,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_normalization(mut self, normalization: bool) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_fields == 0 {
            return Err(Error::Config("model.num_fields must be positive".into()));
        }
        if self.embed_dim == 0 {
            return Err(Error::Config("model.embed_dim must be positive".into()));
        }
        if self.layer_widths.is_empty() {
            return Err(Error::Config("model.layer_widths must be non-empty".into()));
        }
        if let Some(l) = self.layer_widths.iter().position(|&w| w == 0) {
            return Err(Error::Config(format!("model.layer_widths[{l}] must be positive")));
        }
        Ok(())
    }

    /// Input feature count of layer `layer` (zero-based).
    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.num_fields
        } else {
            self.layer_widths[layer - 1]
        }
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().expect("validated config has layers")
    }
}
