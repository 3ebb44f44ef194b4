//! CMGNN: message passing guided by an estimated compatibility matrix.
//!
//! Every node gets `K` virtual neighbours, one prototype per class. Each
//! layer mixes three channels with per-node adaptive weights:
//!
//! ```text
//! Z^l = α_0 Z^{l-1} W_0 + α_1 Â Z^{l-1} W_1 + α_2 B^sup Z_ptt^{l-1} W_2
//! ```
//!
//! where `B^sup = C^ M^` spreads each node's supplementary message over the
//! prototypes according to its soft label `C^` and the estimated
//! compatibility matrix `M^`. `M^` is re-estimated only when validation
//! accuracy improves and is a constant inside the tape.

mod estimate;
mod model;
mod train;

pub use estimate::{
    bootstrap_soft_labels, confidence, degree_weight, estimate_cm, impose_training_labels,
    supplementary_guidance, CmEstimate, CmSnapshot, DegreeWeighting, Stats, SOFT_LABEL_TOL,
};
pub use model::{
    build_prototypes, discrimination_loss, CmgnnArch, CmgnnFuse, CmgnnInputs, CmgnnModel,
    CmgnnOptions, CmgnnOutput, Guidance,
};
pub use train::{train_cmgnn, Ablation, CmgnnConfig, CmgnnTrainable, RunResult};

use crate::htmp::{
    ChannelSpec, ClassifierSpec, CombineRule, FuseRule, GuidanceKind, IndicatorKind, InputSpec,
    LayerSpec, MessagePassingSpec,
};

/// The MLP that CMGNN reduces to when every layer keeps only its ego channel.
pub fn mlp_cat_spec(arch: &CmgnnArch) -> MessagePassingSpec {
    let ego = LayerSpec {
        channels: vec![ChannelSpec::new(
            IndicatorKind::Identity,
            GuidanceKind::Identity,
        )],
        combine: CombineRule::Add,
        activate: true,
    };
    MessagePassingSpec {
        input: InputSpec::Linear {
            relu: false,
            bias: false,
        },
        layers: vec![ego; arch.layers],
        fuse: FuseRule::Cat,
        classifier: ClassifierSpec::Mlp,
        hidden: arch.hidden,
        dropout: arch.dropout,
        relu_variant: arch.relu_variant,
        bias: true,
    }
}

#[cfg(test)]
mod tests;
