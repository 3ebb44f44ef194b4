use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::HopMode;

/// Which nodes count as neighbours for a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndicatorKind {
    /// The node itself.
    Identity,
    /// Raw adjacency `A`.
    Raw,
    /// `A + I`.
    RawSelfLoop,
    /// Nodes within (or exactly at) `k` hops.
    KHop {
        k: usize,
        #[serde(default)]
        mode: HopMode,
    },
    /// Cosine k-nearest neighbours in feature space.
    FeatureKnn { k: usize },
    /// Every node, self included.
    Full,
    /// The `K` class prototypes; only meaningful inside CMGNN.
    Supplementary,
}

/// Pairwise aggregation weights applied over an indicator's support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GuidanceKind {
    /// Keeps only the diagonal of the indicator.
    Identity,
    /// `D^{-1} A_r`.
    DegAvgRow,
    /// `D^{-1/2} A_r D^{-1/2}`.
    DegAvgSym,
    /// `I - D^{-1/2} A_r D^{-1/2}`.
    HighPass,
    /// Explicit `(row, col, weight)` entries, masked by the indicator.
    Constant { entries: Vec<(usize, usize, f64)> },
}

/// How a channel transforms its aggregated input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightMode {
    /// A dedicated weight matrix.
    #[default]
    Own,
    /// One matrix shared by every channel of the layer with the same group name.
    Shared { group: String },
    /// No transform (`W = I`).
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub indicator: IndicatorKind,
    pub guidance: GuidanceKind,
    #[serde(default)]
    pub weight: WeightMode,
}

impl ChannelSpec {
    pub fn new(indicator: IndicatorKind, guidance: GuidanceKind) -> Self {
        Self {
            indicator,
            guidance,
            weight: WeightMode::Own,
        }
    }

    pub fn weightless(mut self) -> Self {
        self.weight = WeightMode::Identity;
        self
    }
}

/// Merges the channel messages of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CombineRule {
    Add,
    WeightedAdd {
        weights: Vec<f64>,
    },
    /// Per-node softmax weights from a small MLP over the channel outputs.
    AdaAdd {
        #[serde(default)]
        degree: bool,
    },
    Cat,
}

/// Merges the layer representations `Z^0..Z^L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuseRule {
    Last,
    Cat,
    /// Learnable scalar per layer, initialised to `1 / (L + 1)`.
    AdaAdd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    /// `Z^0 = X`.
    None,
    /// `Z^0 = X W (+ b)`, optionally followed by ReLU.
    Linear { relu: bool, bias: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    /// The fused representation already has `K` columns.
    None,
    Linear,
    /// One hidden ReLU layer of width `hidden`.
    Mlp,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub channels: Vec<ChannelSpec>,
    pub combine: CombineRule,
    /// Whether the ReLU between layers applies to this layer.
    #[serde(default = "yes")]
    pub activate: bool,
}

/// Declarative description of a multi-channel message-passing network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessagePassingSpec {
    pub input: InputSpec,
    pub layers: Vec<LayerSpec>,
    pub fuse: FuseRule,
    pub classifier: ClassifierSpec,
    pub hidden: usize,
    #[serde(default)]
    pub dropout: f64,
    /// ReLU on each hidden layer input before aggregation instead of after COMBINE.
    #[serde(default)]
    pub relu_variant: bool,
    /// Per-layer bias added after COMBINE.
    #[serde(default = "yes")]
    pub bias: bool,
}

impl MessagePassingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.layers.is_empty() && self.classifier == ClassifierSpec::None {
            return Err(Error::Config(
                "a spec without layers needs a classifier".into(),
            ));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.channels.is_empty() {
                return Err(Error::Config(format!("layer {l} has no channels")));
            }
            if let CombineRule::WeightedAdd { weights } = &layer.combine {
                if weights.len() != layer.channels.len() {
                    return Err(Error::Config(format!(
                        "layer {l}: {} combine weights for {} channels",
                        weights.len(),
                        layer.channels.len()
                    )));
                }
            }
            for ch in &layer.channels {
                if ch.indicator == IndicatorKind::Supplementary {
                    return Err(Error::Config(format!(
                        "layer {l}: the supplementary indicator is only available inside CMGNN"
                    )));
                }
                match ch.indicator {
                    IndicatorKind::KHop { k, .. } if k < 2 => {
                        return Err(Error::Config(format!("layer {l}: k-hop needs k >= 2")))
                    }
                    IndicatorKind::FeatureKnn { k: 0 } => {
                        return Err(Error::Config(format!("layer {l}: k-NN needs k >= 1")))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("model spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}
