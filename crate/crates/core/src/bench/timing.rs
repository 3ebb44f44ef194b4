use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::{run_model, ModelRun};
use crate::error::{Error, Result};
use crate::graph::{Graph, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub epochs: usize,
    /// Mean ms over epochs without a compatibility refresh.
    pub ms_per_epoch: f64,
    pub refresh_count: usize,
    /// Mean ms over refresh epochs (`None` without refreshes).
    pub refresh_ms_per_epoch: Option<f64>,
}

pub fn timing_of(run: &ModelRun) -> Result<TimingReport> {
    let mut plain = Vec::new();
    let mut refresh = Vec::new();
    for (e, &ms) in run.epoch_ms.iter().enumerate() {
        if run.refresh_epochs.contains(&e) {
            refresh.push(ms);
        } else {
            plain.push(ms);
        }
    }
    if plain.is_empty() {
        return Err(Error::InvalidArgument(
            "the run has no epochs outside compatibility refreshes".into(),
        ));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(TimingReport {
        epochs: run.epoch_ms.len(),
        ms_per_epoch: mean(&plain),
        refresh_count: refresh.len(),
        refresh_ms_per_epoch: (!refresh.is_empty()).then(|| mean(&refresh)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub hidden: usize,
    pub base: TimingReport,
    pub doubled: TimingReport,
    /// `doubled.ms_per_epoch / base.ms_per_epoch`.
    pub ratio: f64,
}

/// Times `cfg` at `nhidden` and `2 * nhidden` for a fixed number of epochs.
pub fn scaling_check(
    g: &Graph,
    split: &Split,
    cfg: &RunConfig,
    epochs: usize,
) -> Result<ScalingReport> {
    let fixed = RunConfig {
        max_epochs: epochs,
        patience: epochs,
        ..cfg.clone()
    };
    let base = timing_of(&run_model(g, split, 0, &fixed)?)?;
    let doubled_cfg = RunConfig {
        nhidden: 2 * cfg.nhidden,
        ..fixed
    };
    let doubled = timing_of(&run_model(g, split, 0, &doubled_cfg)?)?;
    Ok(ScalingReport {
        hidden: cfg.nhidden,
        ratio: doubled.ms_per_epoch / base.ms_per_epoch,
        base,
        doubled,
    })
}
