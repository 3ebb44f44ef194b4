use ndarray::Array2;
use rand::Rng;

use super::{ParamId, ParamStore, Tape, Var};
use crate::error::Result;

/// Affine map `x W (+ b)` with Glorot weights and a zero bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let w = store.add_glorot(format!("{name}.w"), d_in, d_out, rng)?;
        let b = if bias {
            Some(store.add(format!("{name}.b"), Array2::zeros((1, d_out)))?)
        } else {
            None
        };
        Ok(Self { w, b, d_in, d_out })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w)?;
        let y = tape.matmul(x, w)?;
        match self.b {
            Some(b) => {
                let b = tape.param(store, b)?;
                tape.add_row_bias(y, b)
            }
            None => Ok(y),
        }
    }
}
