//! Full-batch training with early stopping on validation accuracy.

use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Split;
use crate::htmp::{BoundStructure, ForwardOptions, HtmpModel};
use crate::rng::{self, Rng};
use crate::tensor::{Adam, AdamConfig, ParamStore, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    /// Epochs without a strict validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            weight_decay: 5e-4,
            patience: 200,
            max_epochs: 2000,
        }
    }
}

/// Logits of one forward pass plus an optional extra loss term (already weighted).
#[derive(Debug, Clone, Copy)]
pub struct ForwardPass {
    pub logits: Var,
    pub extra_loss: Option<Var>,
}

/// A model the [`fit`] loop can drive.
pub trait Trainable {
    fn forward(&self, tape: &mut Tape, store: &ParamStore, rng: &mut Rng) -> Result<ForwardPass>;

    /// Called after a strict validation improvement with evaluation-mode logits.
    /// Returns whether model state outside the parameters was refreshed.
    fn on_improvement(
        &mut self,
        _store: &ParamStore,
        _epoch: usize,
        _logits: &Array2<f64>,
    ) -> Result<bool> {
        Ok(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val_curve: Vec<f64>,
    pub loss_curve: Vec<f64>,
    pub best_val_accuracy: f64,
    pub test_accuracy: f64,
    /// Wall-clock milliseconds per epoch, refresh work included.
    pub epoch_ms: Vec<f64>,
    /// Epochs whose improvement triggered a state refresh.
    pub refresh_epochs: Vec<usize>,
    pub test_predictions: Vec<usize>,
    /// Set when a non-finite value aborted training; the curves stop there.
    pub diverged: Option<String>,
}

pub fn argmax_rows(m: &Array2<f64>) -> Vec<usize> {
    m.outer_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn accuracy(predictions: &[usize], labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes
        .iter()
        .filter(|&&i| predictions[i] == labels[i])
        .count();
    hits as f64 / nodes.len() as f64
}

/// Dense labels of every node in the split; unlabeled split nodes are an error.
pub fn split_labels(labels: &[Option<usize>], split: &Split) -> Result<Vec<usize>> {
    split.validate(labels.len())?;
    for &i in split.train.iter().chain(&split.valid).chain(&split.test) {
        if labels[i].is_none() {
            return Err(Error::InvalidArgument(format!(
                "split node {i} is unlabeled"
            )));
        }
    }
    Ok(labels.iter().map(|l| l.unwrap_or(usize::MAX)).collect())
}

/// Runs Adam on the masked cross-entropy (plus any extra loss) of the
/// training nodes until validation accuracy stops improving strictly for
/// `patience` epochs. Parameters are left at the best-validation snapshot.
pub fn fit<T: Trainable>(
    model: &mut T,
    store: &mut ParamStore,
    labels: &[Option<usize>],
    split: &Split,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<FitReport> {
    let labels = split_labels(labels, split)?;
    if split.train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if cfg.max_epochs == 0 {
        return Err(Error::Config("max_epochs must be positive".into()));
    }
    let targets: Vec<(usize, usize)> = split.train.iter().map(|&i| (i, labels[i])).collect();
    let mut opt = Adam::new(AdamConfig::new(cfg.lr, cfg.weight_decay), store)?;
    let mut rng = rng::seeded(seed, rng::stream::DROPOUT);

    let mut report = FitReport {
        best_epoch: 0,
        epochs_run: 0,
        val_curve: Vec::new(),
        loss_curve: Vec::new(),
        best_val_accuracy: f64::NEG_INFINITY,
        test_accuracy: 0.0,
        epoch_ms: Vec::new(),
        refresh_epochs: Vec::new(),
        test_predictions: Vec::new(),
        diverged: None,
    };
    let mut snapshot = store.snapshot();
    let mut since_best = 0;

    for epoch in 0..cfg.max_epochs {
        let start = Instant::now();
        let step = (|| -> Result<(f64, Array2<f64>)> {
            let mut tape = Tape::new(true);
            let pass = model.forward(&mut tape, store, &mut rng)?;
            let mut loss = tape.cross_entropy(pass.logits, &targets)?;
            if let Some(extra) = pass.extra_loss {
                loss = tape.add(loss, extra)?;
            }
            let value = tape.scalar(loss)?;
            let grads = tape.backward(loss)?;
            opt.step(store, &grads)?;

            let mut tape = Tape::eval();
            let pass = model.forward(&mut tape, store, &mut rng)?;
            Ok((value, tape.value(pass.logits).clone()))
        })();
        let (loss, logits) = match step {
            Ok(v) => v,
            Err(Error::Numerical(msg)) => {
                report.diverged = Some(format!("epoch {epoch}: {msg}"));
                report.epochs_run = epoch;
                break;
            }
            Err(e) => return Err(e),
        };
        let preds = argmax_rows(&logits);
        let val = accuracy(&preds, &labels, &split.valid);
        report.loss_curve.push(loss);
        report.val_curve.push(val);
        report.epochs_run = epoch + 1;

        if val > report.best_val_accuracy {
            report.best_val_accuracy = val;
            report.best_epoch = epoch;
            report.test_accuracy = accuracy(&preds, &labels, &split.test);
            report.test_predictions = split.test.iter().map(|&i| preds[i]).collect();
            snapshot = store.snapshot();
            since_best = 0;
            if model.on_improvement(store, epoch, &logits)? {
                report.refresh_epochs.push(epoch);
            }
        } else {
            since_best += 1;
        }
        report.epoch_ms.push(start.elapsed().as_secs_f64() * 1e3);
        if since_best >= cfg.patience {
            break;
        }
    }
    store.restore(&snapshot)?;
    if report.best_val_accuracy == f64::NEG_INFINITY {
        report.best_val_accuracy = 0.0;
    }
    Ok(report)
}

/// An HTMP model together with the graph data it trains on.
pub struct HtmpTrainable<'a> {
    pub model: &'a HtmpModel,
    pub bound: &'a BoundStructure,
    pub features: &'a Array2<f64>,
    pub options: ForwardOptions,
}

impl Trainable for HtmpTrainable<'_> {
    fn forward(&self, tape: &mut Tape, store: &ParamStore, rng: &mut Rng) -> Result<ForwardPass> {
        let x = tape.constant(self.features.clone())?;
        let out = self
            .model
            .forward(tape, store, self.bound, x, rng, &self.options)?;
        Ok(ForwardPass {
            logits: out.logits,
            extra_loss: None,
        })
    }
}
