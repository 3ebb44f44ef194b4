use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::report::{mean_std, select_splits};
use super::run::run_model;
use crate::error::{Error, Result};
use crate::fsio;
use crate::graph::{Graph, Split};
use crate::rng;

/// Hyperparameter domains. Dropout is continuous, everything else categorical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub lr: Vec<f64>,
    pub weight_decay: Vec<f64>,
    pub patience: Vec<usize>,
    pub dropout: (f64, f64),
    pub lambda: Vec<f64>,
    pub layers: Vec<usize>,
    pub nhidden: Vec<usize>,
    pub relu_variant: Vec<bool>,
    pub structure_info: Vec<bool>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            lr: vec![0.001, 0.005, 0.01, 0.05],
            weight_decay: vec![0.0, 1e-7, 5e-7, 1e-6, 5e-6, 5e-5, 5e-4],
            patience: vec![200, 400],
            dropout: (0.0, 0.9),
            lambda: vec![0.0, 0.01, 0.1, 1.0, 10.0],
            layers: vec![1, 2, 4, 8],
            nhidden: vec![32, 64, 128, 256],
            relu_variant: vec![false, true],
            structure_info: vec![false, true],
        }
    }
}

fn pick<T: Copy>(r: &mut rng::Rng, v: &[T], what: &str) -> Result<T> {
    v.choose(r)
        .copied()
        .ok_or_else(|| Error::Config(format!("search space has no {what} values")))
}

impl SearchSpace {
    /// `base` with every searched field replaced by a draw.
    pub fn sample(&self, base: &RunConfig, r: &mut rng::Rng) -> Result<RunConfig> {
        let (lo, hi) = self.dropout;
        if !(0.0..1.0).contains(&lo) || !(lo..1.0).contains(&hi) {
            return Err(Error::Config(format!(
                "dropout range [{lo}, {hi}] must lie in [0, 1)"
            )));
        }
        Ok(RunConfig {
            lr: pick(r, &self.lr, "lr")?,
            weight_decay: pick(r, &self.weight_decay, "weight_decay")?,
            patience: pick(r, &self.patience, "patience")?,
            dropout: r.gen_range(lo..=hi),
            lambda: pick(r, &self.lambda, "lambda")?,
            layers: pick(r, &self.layers, "layers")?,
            nhidden: pick(r, &self.nhidden, "nhidden")?,
            relu_variant: pick(r, &self.relu_variant, "relu_variant")?,
            structure_info: pick(r, &self.structure_info, "structure_info")?,
            ..base.clone()
        })
    }

    pub fn contains(&self, c: &RunConfig) -> bool {
        self.lr.contains(&c.lr)
            && self.weight_decay.contains(&c.weight_decay)
            && self.patience.contains(&c.patience)
            && (self.dropout.0..=self.dropout.1).contains(&c.dropout)
            && self.lambda.contains(&c.lambda)
            && self.layers.contains(&c.layers)
            && self.nhidden.contains(&c.nhidden)
            && self.relu_variant.contains(&c.relu_variant)
            && self.structure_info.contains(&c.structure_info)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial: usize,
    pub config: RunConfig,
    /// Mean best-validation accuracy over the finished splits (the score, 0 if none finished).
    pub mean_val: f64,
    /// `None` when every split diverged.
    pub mean_test: Option<f64>,
    pub diverged_splits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Always `"random"`: uniform sampling over the space.
    pub strategy: String,
    pub best: Trial,
    /// Trials by descending score, earlier trial first on ties.
    pub leaderboard: Vec<Trial>,
}

/// The trial configurations a search with `seed` evaluates.
pub fn sample_trials(
    space: &SearchSpace,
    base: &RunConfig,
    budget: usize,
    seed: u64,
) -> Result<Vec<RunConfig>> {
    let mut r = rng::seeded(seed, rng::stream::SEARCH);
    (0..budget).map(|_| space.sample(base, &mut r)).collect()
}

/// Random search; writes one JSON line per trial to `leaderboard` when given.
pub fn cmd_search(
    g: &Graph,
    splits: &[Split],
    space: &SearchSpace,
    base: &RunConfig,
    budget: usize,
    seed: u64,
    leaderboard: Option<&Path>,
) -> Result<SearchResult> {
    if budget == 0 {
        return Err(Error::Config("search budget must be at least 1".into()));
    }
    let configs = sample_trials(space, base, budget, seed)?;
    let mut trials = Vec::with_capacity(budget);
    for (t, cfg) in configs.into_iter().enumerate() {
        let chosen = select_splits(&cfg, splits)?;
        let runs = chosen
            .par_iter()
            .map(|&(i, s)| run_model(g, s, i, &cfg))
            .collect::<Result<Vec<_>>>()?;
        let ok: Vec<_> = runs.iter().filter(|r| r.diverged.is_none()).collect();
        let val: Vec<f64> = ok.iter().map(|r| r.best_val_accuracy).collect();
        let test: Vec<f64> = ok.iter().map(|r| r.test_accuracy).collect();
        let score = if val.is_empty() {
            0.0
        } else {
            mean_std(&val).0
        };
        trials.push(Trial {
            trial: t,
            config: cfg,
            mean_val: score,
            mean_test: (!test.is_empty()).then(|| mean_std(&test).0),
            diverged_splits: runs
                .iter()
                .filter(|r| r.diverged.is_some())
                .map(|r| r.split_id)
                .collect(),
        });
    }
    if let Some(path) = leaderboard {
        let mut lines = String::new();
        for t in &trials {
            lines.push_str(&serde_json::to_string(t).map_err(|e| Error::Json {
                path: path.to_path_buf(),
                source: e,
            })?);
            lines.push('\n');
        }
        fsio::write_atomic(path, lines.as_bytes())?;
    }
    let mut board = trials;
    board.sort_by(|a, b| {
        b.mean_val
            .total_cmp(&a.mean_val)
            .then(a.trial.cmp(&b.trial))
    });
    Ok(SearchResult {
        strategy: "random".into(),
        best: board[0].clone(),
        leaderboard: board,
    })
}
