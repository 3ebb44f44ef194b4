use ndarray::Array2;
use rand::Rng;

use super::ada::{fixed_alpha, mix_channels, AdaWeight};
use super::realize::{BoundStructure, Propagation};
use super::spec::{
    ClassifierSpec, CombineRule, FuseRule, InputSpec, MessagePassingSpec, WeightMode,
};
use crate::error::{Error, Result};
use crate::tensor::{Linear, ParamId, ParamStore, Tape, Var};

/// Forward-pass switches used by tests and ablations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardOptions {
    /// Replaces every adaptive COMBINE weight by this fixed per-channel vector.
    pub forced_alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct HtmpOutput {
    /// `Z^0..Z^L`.
    pub representations: Vec<Var>,
    pub fused: Var,
    pub logits: Var,
    /// Per-layer channel weights of adaptive COMBINE layers.
    pub alphas: Vec<Option<Var>>,
}

#[derive(Debug, Clone)]
struct LayerParams {
    weights: Vec<Option<ParamId>>,
    ada: Option<AdaWeight>,
    bias: Option<ParamId>,
}

/// Parameters of a [`MessagePassingSpec`] bound to input and class counts.
#[derive(Debug, Clone)]
pub struct HtmpModel {
    spec: MessagePassingSpec,
    input: Option<Linear>,
    layers: Vec<LayerParams>,
    widths: Vec<usize>,
    fuse_weights: Vec<ParamId>,
    classifier: Vec<Linear>,
    n_classes: usize,
}

fn layer_error(l: usize, e: Error) -> Error {
    match e {
        Error::Numerical(m) => Error::Numerical(format!("layer {l}: {m}")),
        other => other,
    }
}

impl HtmpModel {
    /// Registers all parameters in `store` (names are stable, so parameters of
    /// structurally similar specs can be copied by name).
    pub fn new<R: Rng + ?Sized>(
        spec: &MessagePassingSpec,
        n_features: usize,
        n_classes: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        let h = spec.hidden;
        let input = match spec.input {
            InputSpec::None => None,
            InputSpec::Linear { bias, .. } => {
                Some(Linear::new(store, "input", n_features, h, bias, rng)?)
            }
        };
        let mut widths = vec![if input.is_some() { h } else { n_features }];
        let n_layers = spec.layers.len();
        let mut layers = Vec::with_capacity(n_layers);
        for (l, layer) in spec.layers.iter().enumerate() {
            let d_in = widths[l];
            let last = l + 1 == n_layers;
            let d_out = if last && spec.classifier == ClassifierSpec::None {
                n_classes
            } else {
                h
            };
            let mut weights = Vec::new();
            let mut dims = Vec::new();
            let mut shared: Vec<(String, ParamId)> = Vec::new();
            for (c, ch) in layer.channels.iter().enumerate() {
                match &ch.weight {
                    WeightMode::Own => {
                        let w = store.add_glorot(format!("layer{l}.ch{c}.w"), d_in, d_out, rng)?;
                        weights.push(Some(w));
                        dims.push(d_out);
                    }
                    WeightMode::Shared { group } => {
                        let w = match shared.iter().find(|(g, _)| g == group) {
                            Some((_, w)) => *w,
                            None => {
                                let w = store.add_glorot(
                                    format!("layer{l}.shared.{group}.w"),
                                    d_in,
                                    d_out,
                                    rng,
                                )?;
                                shared.push((group.clone(), w));
                                w
                            }
                        };
                        weights.push(Some(w));
                        dims.push(d_out);
                    }
                    WeightMode::Identity => {
                        weights.push(None);
                        dims.push(d_in);
                    }
                }
            }
            let width = match layer.combine {
                CombineRule::Cat => dims.iter().sum(),
                _ => {
                    if dims.iter().any(|&d| d != dims[0]) {
                        return Err(Error::Config(format!(
                            "layer {l}: channels of widths {dims:?} cannot be added"
                        )));
                    }
                    dims[0]
                }
            };
            let ada = match layer.combine {
                CombineRule::AdaAdd { degree } => Some(AdaWeight::new(
                    store,
                    &format!("layer{l}.ada"),
                    dims.iter().sum(),
                    dims.len(),
                    degree,
                    rng,
                )?),
                _ => None,
            };
            let bias = if spec.bias {
                Some(store.add(format!("layer{l}.b"), Array2::zeros((1, width)))?)
            } else {
                None
            };
            layers.push(LayerParams { weights, ada, bias });
            widths.push(width);
        }

        let fuse_weights = match spec.fuse {
            FuseRule::AdaAdd => {
                if widths.iter().any(|&w| w != widths[0]) {
                    return Err(Error::Config(format!(
                        "adaptive FUSE needs equal layer widths, got {widths:?}"
                    )));
                }
                let init = 1.0 / widths.len() as f64;
                (0..widths.len())
                    .map(|l| store.add(format!("fuse.gamma{l}"), Array2::from_elem((1, 1), init)))
                    .collect::<Result<_>>()?
            }
            _ => Vec::new(),
        };
        let fused_width = match spec.fuse {
            FuseRule::Cat => widths.iter().sum(),
            _ => *widths.last().unwrap_or(&0),
        };
        let classifier = match spec.classifier {
            ClassifierSpec::None => {
                if fused_width != n_classes {
                    return Err(Error::Config(format!(
                        "fused width {fused_width} differs from {n_classes} classes and no classifier is configured"
                    )));
                }
                Vec::new()
            }
            ClassifierSpec::Linear => {
                vec![Linear::new(
                    store,
                    "cla",
                    fused_width,
                    n_classes,
                    true,
                    rng,
                )?]
            }
            ClassifierSpec::Mlp => vec![
                Linear::new(store, "cla.0", fused_width, h, true, rng)?,
                Linear::new(store, "cla.1", h, n_classes, true, rng)?,
            ],
        };
        Ok(Self {
            spec: spec.clone(),
            input,
            layers,
            widths,
            fuse_weights,
            classifier,
            n_classes,
        })
    }

    pub fn spec(&self) -> &MessagePassingSpec {
        &self.spec
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Widths of `Z^0..Z^L`.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn fused_width(&self) -> usize {
        match self.spec.fuse {
            FuseRule::Cat => self.widths.iter().sum(),
            _ => *self.widths.last().unwrap_or(&0),
        }
    }

    /// Runs the three-stage AGGREGATE / COMBINE / FUSE pass and the classifier.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        bound: &BoundStructure,
        x: Var,
        rng: &mut R,
        opts: &ForwardOptions,
    ) -> Result<HtmpOutput> {
        let spec = &self.spec;
        let n = tape.shape(x).0;
        if n != bound.n_nodes() || bound.layers.len() != self.layers.len() {
            return Err(Error::Shape(format!(
                "structure bound to {} nodes / {} layers, input has {n} rows and the model {} layers",
                bound.n_nodes(),
                bound.layers.len(),
                self.layers.len()
            )));
        }
        let mut h = x;
        if let (Some(lin), InputSpec::Linear { relu, .. }) = (&self.input, &spec.input) {
            h = tape.dropout(h, spec.dropout, rng)?;
            h = lin.forward(tape, store, h)?;
            if *relu {
                h = tape.relu(h)?;
            }
        }
        let mut reps = vec![h];
        let mut alphas = Vec::with_capacity(self.layers.len());
        let n_layers = self.layers.len();
        for (l, (params, layer)) in self.layers.iter().zip(&spec.layers).enumerate() {
            let out = (|| -> Result<(Var, Option<Var>)> {
                let mut inp = reps[l];
                if spec.relu_variant && l > 0 {
                    inp = tape.relu(inp)?;
                }
                inp = tape.dropout(inp, spec.dropout, rng)?;
                let mut msgs = Vec::with_capacity(params.weights.len());
                for (c, w) in params.weights.iter().enumerate() {
                    msgs.push(aggregate(tape, store, bound.propagation(l, c), inp, *w)?);
                }
                let (z, alpha) = combine(tape, store, &layer.combine, params, &msgs, bound, opts)?;
                let mut z = z;
                if let Some(b) = params.bias {
                    let b = tape.param(store, b)?;
                    z = tape.add_row_bias(z, b)?;
                }
                let is_output = l + 1 == n_layers && spec.classifier == ClassifierSpec::None;
                if !spec.relu_variant && layer.activate && !is_output {
                    z = tape.relu(z)?;
                }
                Ok((z, alpha))
            })()
            .map_err(|e| layer_error(l + 1, e))?;
            reps.push(out.0);
            alphas.push(out.1);
        }

        let fused = fuse(tape, store, spec.fuse, &reps, &self.fuse_weights)?;
        let mut logits = fused;
        if !self.classifier.is_empty() {
            logits = tape.dropout(logits, spec.dropout, rng)?;
            for (i, lin) in self.classifier.iter().enumerate() {
                if i > 0 {
                    logits = tape.relu(logits)?;
                    logits = tape.dropout(logits, spec.dropout, rng)?;
                }
                logits = lin.forward(tape, store, logits)?;
            }
        }
        Ok(HtmpOutput {
            representations: reps,
            fused,
            logits,
            alphas,
        })
    }
}

/// `(A_r ⊙ B_r) Z W`, multiplying in the cheaper order.
pub fn aggregate(
    tape: &mut Tape,
    store: &ParamStore,
    prop: &Propagation,
    z: Var,
    w: Option<ParamId>,
) -> Result<Var> {
    let w = w.map(|w| tape.param(store, w)).transpose()?;
    match (prop, w) {
        (Propagation::Identity, None) => Ok(z),
        (Propagation::Identity, Some(w)) => tape.matmul(z, w),
        (Propagation::Sparse(a), None) => tape.spmm(a, z),
        (Propagation::Sparse(a), Some(w)) => {
            if tape.shape(w).1 < tape.shape(w).0 {
                let zw = tape.matmul(z, w)?;
                tape.spmm(a, zw)
            } else {
                let az = tape.spmm(a, z)?;
                tape.matmul(az, w)
            }
        }
    }
}

fn combine(
    tape: &mut Tape,
    store: &ParamStore,
    rule: &CombineRule,
    params: &LayerParams,
    msgs: &[Var],
    bound: &BoundStructure,
    opts: &ForwardOptions,
) -> Result<(Var, Option<Var>)> {
    match rule {
        CombineRule::Add => Ok((sum_all(tape, msgs)?, None)),
        CombineRule::WeightedAdd { weights } => {
            if weights.len() != msgs.len() {
                return Err(Error::Config(format!(
                    "{} combine weights for {} channels",
                    weights.len(),
                    msgs.len()
                )));
            }
            let scaled = msgs
                .iter()
                .zip(weights)
                .map(|(&m, &w)| tape.scale(m, w))
                .collect::<Result<Vec<_>>>()?;
            Ok((sum_all(tape, &scaled)?, None))
        }
        CombineRule::Cat => Ok((tape.concat(msgs)?, None)),
        CombineRule::AdaAdd { .. } => {
            let n = tape.shape(msgs[0]).0;
            let alpha = match &opts.forced_alpha {
                Some(a) => {
                    if a.len() != msgs.len() {
                        return Err(Error::Config(format!(
                            "forced alpha of length {} for {} channels",
                            a.len(),
                            msgs.len()
                        )));
                    }
                    fixed_alpha(tape, n, a)?
                }
                None => {
                    let ada = params.ada.as_ref().ok_or_else(|| {
                        Error::InvalidArgument("adaptive combine without parameters".into())
                    })?;
                    let deg = if ada.uses_degree() {
                        Some(tape.constant(bound.degrees.clone())?)
                    } else {
                        None
                    };
                    ada.alpha(tape, store, msgs, deg)?
                }
            };
            Ok((mix_channels(tape, alpha, msgs)?, Some(alpha)))
        }
    }
}

fn sum_all(tape: &mut Tape, parts: &[Var]) -> Result<Var> {
    let mut acc = *parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("combining zero channels".into()))?;
    for &p in &parts[1..] {
        acc = tape.add(acc, p)?;
    }
    Ok(acc)
}

/// FUSE over `Z^0..Z^L`.
pub fn fuse(
    tape: &mut Tape,
    store: &ParamStore,
    rule: FuseRule,
    reps: &[Var],
    gammas: &[ParamId],
) -> Result<Var> {
    let last = *reps
        .last()
        .ok_or_else(|| Error::InvalidArgument("fusing zero representations".into()))?;
    match rule {
        FuseRule::Last => Ok(last),
        FuseRule::Cat => tape.concat(reps),
        FuseRule::AdaAdd => {
            if gammas.len() != reps.len() {
                return Err(Error::Shape(format!(
                    "{} fuse weights for {} layers",
                    gammas.len(),
                    reps.len()
                )));
            }
            let mut terms = Vec::with_capacity(reps.len());
            for (&z, &g) in reps.iter().zip(gammas) {
                let g = tape.param(store, g)?;
                terms.push(tape.scalar_mul(g, z)?);
            }
            sum_all(tape, &terms)
        }
    }
}
