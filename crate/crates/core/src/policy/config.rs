use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Component switches for the ablation study. All off is the full model.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablations {
    /// Node vectors come from the input projection alone, no message passing.
    pub no_ggcn: bool,
    /// Fused object vectors drop the metric encoding.
    pub no_metric: bool,
    /// The scene summary is the unweighted mean of the fused vectors.
    pub no_attention: bool,
    /// The history encoding is held at zero.
    pub no_history: bool,
    /// Use the table before retrofitting. The model only records this; the
    /// caller picks the table.
    pub base_embeddings: bool,
    /// Object heads score a fixed list of class slots instead of each object.
    pub fixed_object_decoder: bool,
}

impl Ablations {
    pub const NAMES: [&'static str; 6] =
        ["no_ggcn", "no_metric", "no_attention", "no_history", "base_embeddings", "fixed_object_decoder"];

    /// The configuration with exactly the named flag set.
    pub fn only(name: &str) -> Result<Self> {
        let mut a = Ablations::default();
        match name {
            "no_ggcn" => a.no_ggcn = true,
            "no_metric" => a.no_metric = true,
            "no_attention" => a.no_attention = true,
            "no_history" => a.no_history = true,
            "base_embeddings" => a.base_embeddings = true,
            "fixed_object_decoder" => a.fixed_object_decoder = true,
            other => return Err(Error::Config(alloc::format!("unknown ablation `{other}`"))),
        }
        Ok(a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// Width of node, history and head hidden layers.
    pub hidden: usize,
    /// Message-passing rounds of the graph encoder.
    pub message_steps: usize,
    /// Depth of the metric network.
    pub metric_layers: usize,
    pub embed_dim: usize,
    pub prelu_slope: f64,
    pub learnable_slope: bool,
    /// Class tokens of the fixed-slot decoder. Classes outside the list share
    /// one extra slot.
    pub object_slots: Vec<String>,
    pub ablations: Ablations,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            message_steps: 2,
            metric_layers: 2,
            embed_dim: crate::embed::DESK_DIM,
            prelu_slope: 0.25,
            learnable_slope: false,
            object_slots: Vec::new(),
            ablations: Ablations::default(),
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.hidden == 0 || self.embed_dim == 0 || self.metric_layers == 0 {
            return bad("hidden, embed_dim and metric_layers must be at least 1");
        }
        if self.message_steps == 0 && !self.ablations.no_ggcn {
            return bad("message_steps must be at least 1 unless no_ggcn is set");
        }
        if !self.prelu_slope.is_finite() {
            return bad("prelu_slope must be finite");
        }
        if self.ablations.fixed_object_decoder && self.object_slots.is_empty() {
            return bad("fixed_object_decoder needs object_slots");
        }
        Ok(())
    }

    /// Width of a fused object vector.
    pub fn fused_width(&self) -> usize {
        if self.ablations.no_metric {
            self.hidden
        } else {
            2 * self.hidden
        }
    }

    /// Width of the decoder context `[Ω; g_rel; η]`.
    pub fn context_width(&self) -> usize {
        self.fused_width() + self.embed_dim + self.hidden
    }
}
