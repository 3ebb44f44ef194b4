use serde::{Deserialize, Serialize};

use super::spec::{
    ChannelSpec, ClassifierSpec, CombineRule, FuseRule, GuidanceKind, IndicatorKind, InputSpec,
    LayerSpec, MessagePassingSpec,
};
use crate::error::{Error, Result};
use crate::graph::HopMode;

pub const PRESETS: [&str; 6] = ["mlp", "gcn", "mixhop", "h2gcn", "gprgnn", "acmgcn"];

/// Hyperparameters shared by every preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetParams {
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub relu_variant: bool,
    /// Largest hop order of the MixHop preset.
    pub mixhop_k: usize,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            layers: 2,
            hidden: 64,
            dropout: 0.5,
            relu_variant: false,
            mixhop_k: 2,
        }
    }
}

fn single(ch: ChannelSpec) -> LayerSpec {
    LayerSpec {
        channels: vec![ch],
        combine: CombineRule::Add,
        activate: true,
    }
}

fn base(p: &PresetParams, input: InputSpec, layers: Vec<LayerSpec>) -> MessagePassingSpec {
    MessagePassingSpec {
        input,
        layers,
        fuse: FuseRule::Last,
        classifier: ClassifierSpec::None,
        hidden: p.hidden,
        dropout: p.dropout,
        relu_variant: p.relu_variant,
        bias: true,
    }
}

fn sym(indicator: IndicatorKind) -> ChannelSpec {
    ChannelSpec::new(indicator, GuidanceKind::DegAvgSym)
}

/// Builds one of [`PRESETS`].
pub fn build_preset(name: &str, p: &PresetParams) -> Result<MessagePassingSpec> {
    let l = p.layers;
    let need_layers = || -> Result<()> {
        if l == 0 {
            Err(Error::Config(format!(
                "preset {name} needs at least one layer"
            )))
        } else {
            Ok(())
        }
    };
    let ego = ChannelSpec::new(IndicatorKind::Identity, GuidanceKind::Identity);
    let spec = match name {
        "mlp" => {
            let mut s = base(p, InputSpec::None, vec![single(ego); l]);
            if l == 0 {
                s.classifier = ClassifierSpec::Linear;
            }
            s
        }
        "gcn" => {
            need_layers()?;
            base(
                p,
                InputSpec::None,
                vec![single(sym(IndicatorKind::RawSelfLoop)); l],
            )
        }
        "mixhop" => {
            need_layers()?;
            if p.mixhop_k < 2 {
                return Err(Error::Config("mixhop needs k >= 2".into()));
            }
            let mut channels = vec![ego, sym(IndicatorKind::Raw)];
            for k in 2..=p.mixhop_k {
                channels.push(sym(IndicatorKind::KHop {
                    k,
                    mode: HopMode::Within,
                }));
            }
            let layer = LayerSpec {
                channels,
                combine: CombineRule::Cat,
                activate: true,
            };
            let mut s = base(p, InputSpec::None, vec![layer; l]);
            s.classifier = ClassifierSpec::Linear;
            s
        }
        "h2gcn" => {
            need_layers()?;
            let layer = LayerSpec {
                channels: vec![
                    sym(IndicatorKind::Raw).weightless(),
                    sym(IndicatorKind::KHop {
                        k: 2,
                        mode: HopMode::Exact,
                    })
                    .weightless(),
                ],
                combine: CombineRule::Cat,
                activate: false,
            };
            let mut s = base(
                p,
                InputSpec::Linear {
                    relu: true,
                    bias: true,
                },
                vec![layer; l],
            );
            s.fuse = FuseRule::Cat;
            s.classifier = ClassifierSpec::Linear;
            s.bias = false;
            s
        }
        "gprgnn" => {
            need_layers()?;
            let layer = LayerSpec {
                channels: vec![sym(IndicatorKind::RawSelfLoop).weightless()],
                combine: CombineRule::Add,
                activate: false,
            };
            let mut s = base(
                p,
                InputSpec::Linear {
                    relu: true,
                    bias: true,
                },
                vec![layer; l],
            );
            s.fuse = FuseRule::AdaAdd;
            s.classifier = ClassifierSpec::Linear;
            s.bias = false;
            s
        }
        "acmgcn" => {
            need_layers()?;
            let layer = LayerSpec {
                channels: vec![
                    ego,
                    sym(IndicatorKind::RawSelfLoop),
                    ChannelSpec::new(IndicatorKind::RawSelfLoop, GuidanceKind::HighPass),
                ],
                combine: CombineRule::AdaAdd { degree: false },
                activate: true,
            };
            base(p, InputSpec::None, vec![layer; l])
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESETS.join(", ")
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}
