use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    /// L2 coefficient added to the gradient before the moment updates.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction and coupled L2 weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Result<Self> {
        if config.lr.is_nan()
            || config.lr < 0.0
            || config.weight_decay.is_nan()
            || config.weight_decay < 0.0
        {
            return Err(Error::Config(format!(
                "invalid optimiser settings lr={} weight_decay={}",
                config.lr, config.weight_decay
            )));
        }
        let zeros: Vec<_> = store
            .ids()
            .map(|id| Array2::zeros(store.value(id).dim()))
            .collect();
        Ok(Self {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// First and second moment estimates of a parameter.
    pub fn moments(&self, id: ParamId) -> (&Array2<f64>, &Array2<f64>) {
        (&self.m[id.0], &self.v[id.0])
    }

    /// One update of every parameter; unreached parameters see a zero gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        if store.len() != self.m.len() {
            return Err(Error::Shape(
                "parameter store changed after optimiser creation".into(),
            ));
        }
        for id in store.ids() {
            if let Some(g) = grads.get(id) {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "non-finite gradient for parameter {}",
                        store.name(id)
                    )));
                }
            }
        }
        self.t += 1;
        let AdamConfig {
            lr,
            weight_decay,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for id in store.ids() {
            let i = id.0;
            let mut g = grads.get_or_zeros(store, id);
            if weight_decay > 0.0 {
                g.scaled_add(weight_decay, store.value(id));
            }
            Zip::from(&mut self.m[i])
                .and(&mut self.v[i])
                .and(&g)
                .for_each(|m, v, &g| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                });
            Zip::from(store.value_mut(id))
                .and(&self.m[i])
                .and(&self.v[i])
                .for_each(|p, &m, &v| {
                    *p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
                });
        }
        Ok(())
    }
}
