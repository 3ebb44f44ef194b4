use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::degree::{degree_report, DegreeReport};
use super::run::{run_model, ModelRun};
use crate::error::{Error, Result};
use crate::graph::{Graph, Split};

/// Number of degree buckets in bench reports.
pub const DEGREE_BUCKETS: usize = 5;

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    if values.iter().all(|&v| v == values[0]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `"45.70 ± 4.92"` from fractions in `[0, 1]`.
pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{:.2} ± {:.2}", 100.0 * mean, 100.0 * std)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: RunConfig,
    pub dataset: String,
    pub runs: Vec<ModelRun>,
    /// Test accuracies of the runs that finished, in split order.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub cell: String,
    /// Splits excluded from the aggregate because training diverged.
    pub diverged_splits: Vec<usize>,
    pub degree: Option<DegreeReport>,
    /// Mean wall-clock milliseconds per epoch over all runs.
    pub ms_per_epoch: f64,
}

impl BenchReport {
    pub fn from_runs(config: &RunConfig, g: &Graph, runs: Vec<ModelRun>) -> Result<Self> {
        let accuracies: Vec<f64> = runs
            .iter()
            .filter(|r| r.diverged.is_none())
            .map(|r| r.test_accuracy)
            .collect();
        let diverged_splits: Vec<usize> = runs
            .iter()
            .filter(|r| r.diverged.is_some())
            .map(|r| r.split_id)
            .collect();
        if accuracies.is_empty() {
            return Err(Error::Numerical(format!(
                "training diverged on every split ({diverged_splits:?})"
            )));
        }
        let (mean, std) = mean_std(&accuracies);
        let degree = if runs.iter().any(|r| r.test_nodes.len() < DEGREE_BUCKETS) {
            None
        } else {
            Some(degree_report(g, &runs, DEGREE_BUCKETS)?)
        };
        let epochs: Vec<f64> = runs
            .iter()
            .flat_map(|r| r.epoch_ms.iter().copied())
            .collect();
        Ok(Self {
            config: config.clone(),
            dataset: g.name().to_string(),
            cell: format_cell(mean, std),
            runs,
            accuracies,
            mean,
            std,
            diverged_splits,
            degree,
            ms_per_epoch: mean_std(&epochs).0,
        })
    }

    /// Aligned text table: one row per split, then the aggregate cell.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} on {}\n", self.config.model, self.dataset);
        s.push_str(&format!(
            "{:>6}  {:>9}  {:>10}  {:>6}\n",
            "split", "test acc", "best epoch", "epochs"
        ));
        for r in &self.runs {
            let acc = match &r.diverged {
                Some(_) => "diverged".to_string(),
                None => format!("{:.2}", 100.0 * r.test_accuracy),
            };
            s.push_str(&format!(
                "{:>6}  {:>9}  {:>10}  {:>6}\n",
                r.split_id, acc, r.best_epoch, r.epochs_run
            ));
        }
        s.push_str(&format!("{:>6}  {}\n", "all", self.cell));
        if !self.diverged_splits.is_empty() {
            s.push_str(&format!(
                "warning: splits {:?} diverged and are excluded\n",
                self.diverged_splits
            ));
        }
        if let Some(d) = &self.degree {
            s.push_str("degree buckets (low to high):\n");
            for (b, st) in d.buckets.iter().enumerate() {
                s.push_str(&format!(
                    "{:>6}  deg {:>3}-{:<3}  {:.2}\n",
                    b,
                    st.min_degree,
                    st.max_degree,
                    100.0 * st.accuracy
                ));
            }
        }
        s.push_str(&format!("ms/epoch {:.3}\n", self.ms_per_epoch));
        s
    }
}

/// Split ids selected by `cfg.splits` (all when empty).
pub fn select_splits<'a>(cfg: &RunConfig, splits: &'a [Split]) -> Result<Vec<(usize, &'a Split)>> {
    if splits.is_empty() {
        return Err(Error::InvalidArgument("the dataset has no splits".into()));
    }
    if cfg.splits.is_empty() {
        return Ok(splits.iter().enumerate().collect());
    }
    cfg.splits
        .iter()
        .map(|&i| {
            splits
                .get(i)
                .map(|s| (i, s))
                .ok_or_else(|| Error::Range(format!("split {i} of {}", splits.len())))
        })
        .collect()
}

/// Trains `cfg` on every selected split (in parallel on the current rayon pool).
pub fn cmd_bench(g: &Graph, splits: &[Split], cfg: &RunConfig) -> Result<BenchReport> {
    cfg.model_kind()?;
    let chosen = select_splits(cfg, splits)?;
    let runs = chosen
        .par_iter()
        .map(|&(i, s)| run_model(g, s, i, cfg))
        .collect::<Result<Vec<_>>>()?;
    BenchReport::from_runs(cfg, g, runs)
}
