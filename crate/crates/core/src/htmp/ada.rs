use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Linear, ParamStore, Tape, Var};

/// Per-node channel weights
/// `softmax(sigmoid([Z_0 ‖ .. ‖ Z_m ‖ d] W_att + b_att) W_mix + b_mix)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdaWeight {
    att: Linear,
    mix: Linear,
    n_channels: usize,
    degree: bool,
}

impl AdaWeight {
    /// `input_width` is the summed width of the channel outputs.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input_width: usize,
        n_channels: usize,
        degree: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let width = input_width + usize::from(degree);
        Ok(Self {
            att: Linear::new(store, &format!("{name}.att"), width, n_channels, true, rng)?,
            mix: Linear::new(
                store,
                &format!("{name}.mix"),
                n_channels,
                n_channels,
                true,
                rng,
            )?,
            n_channels,
            degree,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn uses_degree(&self) -> bool {
        self.degree
    }

    /// `N x m` weights; `degree` must be given exactly when the weight was built with it.
    pub fn alpha(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        parts: &[Var],
        degree: Option<Var>,
    ) -> Result<Var> {
        if parts.len() != self.n_channels {
            return Err(Error::Shape(format!(
                "adaptive weight over {} channels got {}",
                self.n_channels,
                parts.len()
            )));
        }
        let mut inputs = parts.to_vec();
        match (self.degree, degree) {
            (true, Some(d)) => inputs.push(d),
            (false, None) => {}
            _ => {
                return Err(Error::InvalidArgument(
                    "degree column does not match the adaptive weight configuration".into(),
                ))
            }
        }
        let h = tape.concat(&inputs)?;
        let h = self.att.forward(tape, store, h)?;
        let h = tape.sigmoid(h)?;
        let h = self.mix.forward(tape, store, h)?;
        tape.softmax(h)
    }
}

/// `N x m` constant weights repeating `weights` on every row.
pub fn fixed_alpha(tape: &mut Tape, n: usize, weights: &[f64]) -> Result<Var> {
    let row = weights.to_vec();
    tape.constant(Array2::from_shape_fn((n, row.len()), |(_, j)| row[j]))
}

/// `Σ_i diag(alpha[:, i]) parts[i]`.
pub fn mix_channels(tape: &mut Tape, alpha: Var, parts: &[Var]) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for (i, &p) in parts.iter().enumerate() {
        let a = tape.column(alpha, i)?;
        let term = tape.row_scale(a, p)?;
        acc = Some(match acc {
            Some(s) => tape.add(s, term)?,
            None => term,
        });
    }
    acc.ok_or_else(|| Error::InvalidArgument("mixing zero channels".into()))
}
