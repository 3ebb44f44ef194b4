use serde::{Deserialize, Serialize};

use super::config::{ModelKind, RunConfig};
use crate::cmgnn::{train_cmgnn, CmSnapshot};
use crate::error::Result;
use crate::graph::{Graph, Split};
use crate::htmp::{BoundStructure, ForwardOptions, HtmpModel};
use crate::rng;
use crate::tensor::ParamStore;
use crate::train::{fit, HtmpTrainable};

/// Outcome of training one model on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRun {
    pub model: String,
    pub split_id: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub best_val_accuracy: f64,
    pub test_accuracy: f64,
    pub val_curve: Vec<f64>,
    pub loss_curve: Vec<f64>,
    pub epoch_ms: Vec<f64>,
    pub refresh_epochs: Vec<usize>,
    pub test_nodes: Vec<usize>,
    pub test_predictions: Vec<usize>,
    /// Final compatibility estimate of a CMGNN run.
    pub estimate: Option<CmSnapshot>,
    pub diverged: Option<String>,
}

/// Seed of split `split_id` under base seed `seed`.
pub fn split_seed(seed: u64, split_id: usize) -> u64 {
    seed.wrapping_add(split_id as u64)
}

pub fn run_model(g: &Graph, split: &Split, split_id: usize, cfg: &RunConfig) -> Result<ModelRun> {
    let seed = split_seed(cfg.seed, split_id);
    match cfg.model_kind()? {
        ModelKind::Cmgnn(c) => {
            let r = train_cmgnn(g, split, split_id, &c, seed)?;
            Ok(ModelRun {
                model: cfg.model.clone(),
                split_id,
                seed,
                best_epoch: r.best_epoch,
                epochs_run: r.epochs_run,
                best_val_accuracy: r.best_val_accuracy,
                test_accuracy: r.test_accuracy,
                val_curve: r.val_curve,
                loss_curve: r.loss_curve,
                epoch_ms: r.epoch_ms,
                refresh_epochs: r.refresh_epochs,
                test_nodes: split.test.clone(),
                test_predictions: r.test_predictions,
                estimate: Some(r.estimate),
                diverged: r.diverged,
            })
        }
        ModelKind::Htmp(spec) => {
            let mut store = ParamStore::new();
            let mut init = rng::seeded(seed, rng::stream::INIT);
            let model =
                HtmpModel::new(&spec, g.n_features(), g.n_classes(), &mut store, &mut init)?;
            let bound = BoundStructure::new(&spec, g)?;
            let mut t = HtmpTrainable {
                model: &model,
                bound: &bound,
                features: g.features(),
                options: ForwardOptions::default(),
            };
            let r = fit(
                &mut t,
                &mut store,
                g.labels(),
                split,
                &cfg.train_config(),
                seed,
            )?;
            Ok(ModelRun {
                model: cfg.model.clone(),
                split_id,
                seed,
                best_epoch: r.best_epoch,
                epochs_run: r.epochs_run,
                best_val_accuracy: r.best_val_accuracy,
                test_accuracy: r.test_accuracy,
                val_curve: r.val_curve,
                loss_curve: r.loss_curve,
                epoch_ms: r.epoch_ms,
                refresh_epochs: r.refresh_epochs,
                test_nodes: split.test.clone(),
                test_predictions: r.test_predictions,
                estimate: None,
                diverged: r.diverged,
            })
        }
    }
}
