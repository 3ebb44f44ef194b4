//! Heterophilous message passing as a composable algebra.
//!
//! A layer aggregates its input through several channels, each a
//! neighbourhood indicator `A_r` weighted by an aggregation guidance `B_r`
//! and followed by an optional weight matrix:
//!
//! ```text
//! Z~_r = (A_r ⊙ B_r) Z^{l-1} W_r
//! Z^l  = COMBINE(Z~_1, .., Z~_R)
//! Z    = FUSE(Z^0, .., Z^L)
//! ```
//!
//! [`MessagePassingSpec`] describes such a stack declaratively (and is
//! JSON-serialisable), [`BoundStructure`] realises its sparse operators on a
//! graph once, and [`HtmpModel`] owns the parameters and runs the forward pass.
//! [`build_preset`] produces the standard baselines.

mod ada;
mod model;
mod presets;
mod realize;
mod spec;

pub use ada::{fixed_alpha, mix_channels, AdaWeight};
pub use model::{aggregate, fuse, ForwardOptions, HtmpModel, HtmpOutput};
pub use presets::{build_preset, PresetParams, PRESETS};
pub use realize::{
    apply_guidance, realize_channel, realize_indicator, BoundStructure, Propagation,
};
pub use spec::{
    ChannelSpec, ClassifierSpec, CombineRule, FuseRule, GuidanceKind, IndicatorKind, InputSpec,
    LayerSpec, MessagePassingSpec, WeightMode,
};
