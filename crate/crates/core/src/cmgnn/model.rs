use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{l1_normalize_rows, Graph};
use crate::htmp::{fixed_alpha, mix_channels, AdaWeight};
use crate::sparse::SparseMatrix;
use crate::tensor::{Linear, ParamId, ParamStore, Tape, Var};

/// Which layers enter the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CmgnnFuse {
    /// `Z^0 ‖ .. ‖ Z^L`.
    #[default]
    Cat,
    /// `Z^L` only.
    Last,
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmgnnArch {
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    /// Prepends the adjacency rows as extra input features.
    pub structure_info: bool,
    pub relu_variant: bool,
    /// Symmetric instead of row normalisation on the raw-neighbour channel.
    pub sym_raw: bool,
    pub fuse: CmgnnFuse,
}

impl Default for CmgnnArch {
    fn default() -> Self {
        Self {
            layers: 2,
            hidden: 64,
            dropout: 0.5,
            structure_info: false,
            relu_variant: false,
            sym_raw: false,
            fuse: CmgnnFuse::Cat,
        }
    }
}

/// Class prototypes: `X_ptt = Norm(C_train^T X_train)`.
pub fn build_prototypes(g: &Graph, train: &[usize]) -> Result<Array2<f64>> {
    let k = g.n_classes();
    let x = g.features();
    let mut out = Array2::<f64>::zeros((k, g.n_features()));
    let mut counts = vec![0usize; k];
    for &i in train {
        let y = g
            .label(i)
            .ok_or_else(|| Error::InvalidArgument(format!("training node {i} is unlabeled")))?;
        out.row_mut(y).scaled_add(1.0, &x.row(i));
        counts[y] += 1;
    }
    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if !empty.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "classes {empty:?} have no training nodes, so their prototypes are undefined"
        )));
    }
    l1_normalize_rows(&mut out);
    Ok(out)
}

/// Graph-side constants of a forward pass.
#[derive(Debug, Clone)]
pub struct CmgnnInputs {
    pub features: Array2<f64>,
    pub prototypes: Array2<f64>,
    /// Row-normalised adjacency used by the structure encoder.
    pub structure: Arc<SparseMatrix>,
    /// Propagation of the raw-neighbour channel.
    pub raw: Arc<SparseMatrix>,
    pub degrees: Array2<f64>,
}

impl CmgnnInputs {
    pub fn new(g: &Graph, prototypes: Array2<f64>, sym_raw: bool) -> Result<Self> {
        if prototypes.dim() != (g.n_classes(), g.n_features()) {
            return Err(Error::Shape(format!(
                "prototypes {:?} for {} classes and {} features",
                prototypes.dim(),
                g.n_classes(),
                g.n_features()
            )));
        }
        let structure = Arc::new(g.row_normalized_adjacency());
        let raw = if sym_raw {
            Arc::new(g.adjacency().sym_normalize()?)
        } else {
            structure.clone()
        };
        let degrees = Array2::from_shape_fn((g.n_nodes(), 1), |(i, _)| g.neighbors(i).len() as f64);
        Ok(Self {
            features: g.features().clone(),
            prototypes,
            structure,
            raw,
            degrees,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.features.nrows()
    }
}

/// The compatibility state a forward pass treats as constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Guidance {
    /// `M^`, `K x K`.
    pub m_hat: Array2<f64>,
    /// `B^sup = C^ M^`, `N x K`.
    pub b_sup: Array2<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CmgnnOptions {
    /// Fixed `(ego, raw, supplementary)` weights in every layer.
    pub forced_alpha: Option<[f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct CmgnnOutput {
    pub z: Var,
    pub z_ptt: Var,
    pub logits: Var,
    pub logits_ptt: Var,
    pub alphas: Vec<Var>,
}

#[derive(Debug, Clone)]
enum Encoder {
    Plain(ParamId),
    Structure {
        wx: ParamId,
        wa: ParamId,
        w0: ParamId,
    },
}

#[derive(Debug, Clone)]
struct Layer {
    w: [ParamId; 3],
    ada: AdaWeight,
    bias: ParamId,
}

#[derive(Debug, Clone)]
pub struct CmgnnModel {
    arch: CmgnnArch,
    encoder: Encoder,
    layers: Vec<Layer>,
    cla: [Linear; 2],
}

impl CmgnnModel {
    pub fn new<R: Rng + ?Sized>(
        arch: &CmgnnArch,
        n_nodes: usize,
        n_features: usize,
        n_classes: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        let h = arch.hidden;
        if h == 0 || n_classes < 2 {
            return Err(Error::Config(format!(
                "cmgnn needs a positive hidden width and two classes (hidden {h}, classes {n_classes})"
            )));
        }
        if !(0.0..1.0).contains(&arch.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                arch.dropout
            )));
        }
        let encoder = if arch.structure_info {
            Encoder::Structure {
                wx: store.add_glorot("input.x.w", n_features, h, rng)?,
                wa: store.add_glorot("input.a.w", n_nodes, h, rng)?,
                w0: store.add_glorot("input.w", 2 * h, h, rng)?,
            }
        } else {
            Encoder::Plain(store.add_glorot("input.w", n_features, h, rng)?)
        };
        let mut layers = Vec::with_capacity(arch.layers);
        for l in 0..arch.layers {
            let mut w = Vec::with_capacity(3);
            for c in 0..3 {
                w.push(store.add_glorot(format!("layer{l}.ch{c}.w"), h, h, rng)?);
            }
            let ada = AdaWeight::new(store, &format!("layer{l}.ada"), 3 * h, 3, true, rng)?;
            let bias = store.add_zeros(format!("layer{l}.b"), 1, h)?;
            layers.push(Layer {
                w: [w[0], w[1], w[2]],
                ada,
                bias,
            });
        }
        let fused = match arch.fuse {
            CmgnnFuse::Cat => (arch.layers + 1) * h,
            CmgnnFuse::Last => h,
        };
        let cla = [
            Linear::new(store, "cla.0", fused, h, true, rng)?,
            Linear::new(store, "cla.1", h, n_classes, true, rng)?,
        ];
        Ok(Self {
            arch: *arch,
            encoder,
            layers,
            cla,
        })
    }

    pub fn arch(&self) -> &CmgnnArch {
        &self.arch
    }

    pub fn fused_width(&self) -> usize {
        match self.arch.fuse {
            CmgnnFuse::Cat => (self.arch.layers + 1) * self.arch.hidden,
            CmgnnFuse::Last => self.arch.hidden,
        }
    }

    /// Nodes and prototypes pass through the same layers. Prototypes have no
    /// raw neighbours, degree 0 and supplementary guidance `M^`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        inputs: &CmgnnInputs,
        guidance: &Guidance,
        rng: &mut R,
        opts: &CmgnnOptions,
    ) -> Result<CmgnnOutput> {
        let n = inputs.n_nodes();
        let k = inputs.prototypes.nrows();
        if guidance.b_sup.dim() != (n, k) || guidance.m_hat.dim() != (k, k) {
            return Err(Error::Shape(format!(
                "guidance B^sup {:?} and M^ {:?} for {n} nodes and {k} classes",
                guidance.b_sup.dim(),
                guidance.m_hat.dim()
            )));
        }
        let p = self.arch.dropout;
        let x = tape.constant(inputs.features.clone())?;
        let x = tape.dropout(x, p, rng)?;
        let xp = tape.constant(inputs.prototypes.clone())?;
        let xp = tape.dropout(xp, p, rng)?;
        let (mut z, mut zp) = match &self.encoder {
            Encoder::Plain(w0) => {
                let w0 = tape.param(store, *w0)?;
                (tape.matmul(x, w0)?, tape.matmul(xp, w0)?)
            }
            Encoder::Structure { wx, wa, w0 } => {
                let (wx, wa, w0) = (
                    tape.param(store, *wx)?,
                    tape.param(store, *wa)?,
                    tape.param(store, *w0)?,
                );
                let fx = tape.matmul(x, wx)?;
                let fa = tape.spmm(&inputs.structure, wa)?;
                let h = tape.concat(&[fx, fa])?;
                let z = tape.matmul(h, w0)?;
                let fxp = tape.matmul(xp, wx)?;
                let zeros = tape.constant(Array2::zeros((k, self.arch.hidden)))?;
                let hp = tape.concat(&[fxp, zeros])?;
                (z, tape.matmul(hp, w0)?)
            }
        };
        let b_sup = tape.constant(guidance.b_sup.clone())?;
        let m_hat = tape.constant(guidance.m_hat.clone())?;
        let deg = tape.constant(inputs.degrees.clone())?;
        let deg_p = tape.constant(Array2::zeros((k, 1)))?;
        let zero_raw = tape.constant(Array2::zeros((k, self.arch.hidden)))?;

        let mut reps = vec![z];
        let mut reps_p = vec![zp];
        let mut alphas = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let step = (|| -> Result<(Var, Var, Var)> {
                if self.arch.relu_variant && l > 0 {
                    z = tape.relu(z)?;
                    zp = tape.relu(zp)?;
                }
                z = tape.dropout(z, p, rng)?;
                zp = tape.dropout(zp, p, rng)?;
                let [w0, w1, w2] = layer.w.map(|w| tape.param(store, w));
                let (w0, w1, w2) = (w0?, w1?, w2?);

                let sup_msg = tape.matmul(zp, w2)?;
                let ego = tape.matmul(z, w0)?;
                let zw1 = tape.matmul(z, w1)?;
                let raw = tape.spmm(&inputs.raw, zw1)?;
                let sup = tape.matmul(b_sup, sup_msg)?;
                let ego_p = tape.matmul(zp, w0)?;
                let sup_p = tape.matmul(m_hat, sup_msg)?;

                let (alpha, alpha_p) = match opts.forced_alpha {
                    Some(a) => (fixed_alpha(tape, n, &a)?, fixed_alpha(tape, k, &a)?),
                    None => (
                        layer.ada.alpha(tape, store, &[ego, raw, sup], Some(deg))?,
                        layer
                            .ada
                            .alpha(tape, store, &[ego_p, zero_raw, sup_p], Some(deg_p))?,
                    ),
                };
                let b = tape.param(store, layer.bias)?;
                let mut out = mix_channels(tape, alpha, &[ego, raw, sup])?;
                out = tape.add_row_bias(out, b)?;
                let mut out_p = mix_channels(tape, alpha_p, &[ego_p, zero_raw, sup_p])?;
                out_p = tape.add_row_bias(out_p, b)?;
                if !self.arch.relu_variant {
                    out = tape.relu(out)?;
                    out_p = tape.relu(out_p)?;
                }
                Ok((out, out_p, alpha))
            })()
            .map_err(|e| match e {
                Error::Numerical(m) => Error::Numerical(format!("layer {}: {m}", l + 1)),
                other => other,
            })?;
            z = step.0;
            zp = step.1;
            reps.push(z);
            reps_p.push(zp);
            alphas.push(step.2);
        }

        let (z, z_ptt) = match self.arch.fuse {
            CmgnnFuse::Cat => (tape.concat(&reps)?, tape.concat(&reps_p)?),
            CmgnnFuse::Last => (z, zp),
        };
        let logits = self.classify(tape, store, z, rng)?;
        let logits_ptt = self.classify(tape, store, z_ptt, rng)?;
        Ok(CmgnnOutput {
            z,
            z_ptt,
            logits,
            logits_ptt,
            alphas,
        })
    }

    fn classify<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        z: Var,
        rng: &mut R,
    ) -> Result<Var> {
        let p = self.arch.dropout;
        let h = tape.dropout(z, p, rng)?;
        let h = self.cla[0].forward(tape, store, h)?;
        let h = tape.relu(h)?;
        let h = tape.dropout(h, p, rng)?;
        self.cla[1].forward(tape, store, h)
    }
}

/// `Σ_{i≠j} cos(M^_i Z_ptt, M^_j Z_ptt)`.
pub fn discrimination_loss(tape: &mut Tape, m_hat: &Array2<f64>, z_ptt: Var) -> Result<Var> {
    let k = m_hat.nrows();
    if tape.shape(z_ptt).0 != k {
        return Err(Error::Shape(format!(
            "{} prototype rows for a {k}-class compatibility matrix",
            tape.shape(z_ptt).0
        )));
    }
    let m = tape.constant(m_hat.clone())?;
    let desired = tape.matmul(m, z_ptt)?;
    let rows: Vec<Var> = (0..k)
        .map(|i| tape.gather_rows(desired, &[i]))
        .collect::<Result<_>>()?;
    let mut acc: Option<Var> = None;
    for i in 0..k {
        for j in i + 1..k {
            let c = tape.cosine(rows[i], rows[j])?;
            acc = Some(match acc {
                Some(a) => tape.add(a, c)?,
                None => c,
            });
        }
    }
    match acc {
        Some(a) => tape.scale(a, 2.0),
        None => tape.constant(Array2::zeros((1, 1))),
    }
}
