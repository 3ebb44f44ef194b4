use serde::{Deserialize, Serialize};

use super::run::ModelRun;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Splits `nodes` into `n_buckets` equal-count groups of ascending degree
/// (ties broken by node index). Sizes differ by at most one, larger first.
pub fn degree_buckets(g: &Graph, nodes: &[usize], n_buckets: usize) -> Result<Vec<Vec<usize>>> {
    if n_buckets == 0 {
        return Err(Error::InvalidArgument("need at least one bucket".into()));
    }
    if nodes.len() < n_buckets {
        return Err(Error::InvalidArgument(format!(
            "{} test nodes cannot fill {n_buckets} degree buckets",
            nodes.len()
        )));
    }
    let mut sorted = nodes.to_vec();
    sorted.sort_by_key(|&i| (g.neighbors(i).len(), i));
    let (base, extra) = (sorted.len() / n_buckets, sorted.len() % n_buckets);
    let mut out = Vec::with_capacity(n_buckets);
    let mut start = 0;
    for b in 0..n_buckets {
        let size = base + usize::from(b < extra);
        out.push(sorted[start..start + size].to_vec());
        start += size;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStat {
    pub min_degree: usize,
    pub max_degree: usize,
    /// Mean bucket size over the runs.
    pub size: f64,
    /// Accuracy averaged over the runs.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub buckets: Vec<BucketStat>,
    /// Mean test accuracy over the same runs.
    pub overall: f64,
}

impl DegreeReport {
    /// Size-weighted mean of the bucket accuracies.
    pub fn recombined(&self) -> f64 {
        let total: f64 = self.buckets.iter().map(|b| b.size).sum();
        self.buckets
            .iter()
            .map(|b| b.size * b.accuracy)
            .sum::<f64>()
            / total
    }
}

/// Per-bucket test accuracy averaged over runs. Every run must share the
/// test-set size, which holds for splits drawn by the same protocol.
pub fn degree_report(g: &Graph, runs: &[ModelRun], n_buckets: usize) -> Result<DegreeReport> {
    let runs: Vec<&ModelRun> = runs.iter().filter(|r| r.diverged.is_none()).collect();
    if runs.is_empty() {
        return Err(Error::InvalidArgument(
            "no completed runs to report on".into(),
        ));
    }
    let labels: Vec<usize> = g.labels().iter().map(|l| l.unwrap_or(usize::MAX)).collect();
    let mut acc = vec![0.0; n_buckets];
    let mut size = vec![0.0; n_buckets];
    let mut min_deg = vec![usize::MAX; n_buckets];
    let mut max_deg = vec![0; n_buckets];
    let mut overall = 0.0;
    for r in &runs {
        if r.test_predictions.len() != r.test_nodes.len() {
            return Err(Error::Shape(format!(
                "split {}: {} predictions for {} test nodes",
                r.split_id,
                r.test_predictions.len(),
                r.test_nodes.len()
            )));
        }
        let pred: std::collections::HashMap<usize, usize> = r
            .test_nodes
            .iter()
            .copied()
            .zip(r.test_predictions.iter().copied())
            .collect();
        let hits = r
            .test_nodes
            .iter()
            .filter(|&&i| pred[&i] == labels[i])
            .count();
        overall += hits as f64 / r.test_nodes.len() as f64;
        for (b, nodes) in degree_buckets(g, &r.test_nodes, n_buckets)?
            .iter()
            .enumerate()
        {
            let hits = nodes.iter().filter(|&&i| pred[&i] == labels[i]).count();
            acc[b] += hits as f64 / nodes.len() as f64;
            size[b] += nodes.len() as f64;
            for &i in nodes {
                let d = g.neighbors(i).len();
                min_deg[b] = min_deg[b].min(d);
                max_deg[b] = max_deg[b].max(d);
            }
        }
    }
    let n = runs.len() as f64;
    Ok(DegreeReport {
        buckets: (0..n_buckets)
            .map(|b| BucketStat {
                min_degree: min_deg[b],
                max_degree: max_deg[b],
                size: size[b] / n,
                accuracy: acc[b] / n,
            })
            .collect(),
        overall: overall / n,
    })
}
