use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{semantic_neighborhood, CompatibilityMatrix, Graph};

/// Tolerance on the row sums of soft labels.
pub const SOFT_LABEL_TOL: f64 = 1e-6;

/// How node degrees weight the compatibility estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DegreeWeighting {
    /// The two-threshold weighting of [`degree_weight`].
    #[default]
    Thresholded,
    /// Every node weighs 1.
    Unit,
}

/// `log K - H(row)` per row, clamped to `[0, log K]`.
pub fn confidence(soft: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let k = soft.ncols();
    if k == 0 {
        return Err(Error::Shape("soft labels with zero classes".into()));
    }
    let log_k = (k as f64).ln();
    soft.outer_iter()
        .enumerate()
        .map(|(i, row)| {
            let s: f64 = row.sum();
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) || (s - 1.0).abs() > SOFT_LABEL_TOL {
                return Err(Error::InvalidArgument(format!(
                    "soft label row {i} is not a distribution (sum {s})"
                )));
            }
            let h: f64 = row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
            let g = log_k - h;
            // entropy of a uniform row can land a few ulps below log K
            Ok(if g < 1e-12 { 0.0 } else { g.min(log_k) })
        })
        .collect()
}

/// Degree weight in `[0, 1]`: `d / 2K` up to `K`, `0.25 + d / 4K` up to `3K`, then 1.
pub fn degree_weight(d: usize, k: usize) -> f64 {
    let (d, kf) = (d as f64, k as f64);
    if d <= kf {
        d / (2.0 * kf)
    } else if d <= 3.0 * kf {
        0.25 + d / (4.0 * kf)
    } else {
        1.0
    }
}

/// An estimated compatibility matrix and the node weights that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmEstimate {
    pub m_hat: CompatibilityMatrix,
    pub confidence: Vec<f64>,
    pub degree_weights: Vec<f64>,
    /// Epoch whose predictions produced the estimate; `None` for the bootstrap.
    pub epoch: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: 0.0,
                min: 0.0,
                max: 0.0,
            };
        }
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Serializable digest of a [`CmEstimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmSnapshot {
    pub m_hat: CompatibilityMatrix,
    pub confidence: Stats,
    pub degree_weight: Stats,
    pub epoch: Option<usize>,
}

impl CmEstimate {
    pub fn snapshot(&self) -> CmSnapshot {
        CmSnapshot {
            m_hat: self.m_hat.clone(),
            confidence: Stats::of(&self.confidence),
            degree_weight: Stats::of(&self.degree_weights),
            epoch: self.epoch,
        }
    }
}

/// Estimates the compatibility matrix from soft labels:
///
/// ```text
/// C^nb = Norm(A (g · C))
/// M^   = Norm(Norm((w · g · C)^T) C^nb)
/// ```
///
/// with confidence `g`, degree weights `w` and L1 row normalisation `Norm`.
pub fn estimate_cm(
    g: &Graph,
    soft: ArrayView2<'_, f64>,
    weighting: DegreeWeighting,
) -> Result<CmEstimate> {
    let (n, k) = soft.dim();
    if n != g.n_nodes() || k != g.n_classes() {
        return Err(Error::Shape(format!(
            "soft labels {n}x{k} for a graph with {} nodes and {} classes",
            g.n_nodes(),
            g.n_classes()
        )));
    }
    let conf = confidence(soft)?;
    let degree_weights: Vec<f64> = match weighting {
        DegreeWeighting::Thresholded => g.degrees().iter().map(|&d| degree_weight(d, k)).collect(),
        DegreeWeighting::Unit => vec![1.0; n],
    };
    if conf.iter().zip(&degree_weights).all(|(c, w)| c * w == 0.0) {
        return Err(Error::Numerical(
            "every node has zero confidence-degree weight; train longer or warm up before estimating"
                .into(),
        ));
    }

    let mut weighted = soft.to_owned();
    for (mut row, &c) in weighted.outer_iter_mut().zip(&conf) {
        row *= c;
    }
    let nb = semantic_neighborhood(g, weighted.view())?;

    // Norm((w g C)^T): class k spreads unit mass over nodes in proportion to w_i g_i C_ik
    for (mut row, &w) in weighted.outer_iter_mut().zip(&degree_weights) {
        row *= w;
    }
    let col_mass = weighted.sum_axis(Axis(0));
    let mut mass = weighted.t().dot(&nb);
    for (mut row, &s) in mass.outer_iter_mut().zip(col_mass.iter()) {
        if s > 0.0 {
            row /= s;
        }
    }
    let m_hat = CompatibilityMatrix::from_mass(mass.view())?;
    Ok(CmEstimate {
        m_hat,
        confidence: conf,
        degree_weights,
        epoch: None,
    })
}

/// `B^sup = C M^`: each node's desired neighbour-class distribution.
pub fn supplementary_guidance(
    soft: ArrayView2<'_, f64>,
    m_hat: &CompatibilityMatrix,
) -> Result<Array2<f64>> {
    if soft.ncols() != m_hat.n_classes() {
        return Err(Error::Shape(format!(
            "soft labels with {} columns against a {}-class compatibility matrix",
            soft.ncols(),
            m_hat.n_classes()
        )));
    }
    Ok(soft.dot(&m_hat.to_array()))
}

/// Uniform rows for every node, one-hot truth for the training nodes.
pub fn bootstrap_soft_labels(
    labels: &[Option<usize>],
    k: usize,
    train: &[usize],
) -> Result<Array2<f64>> {
    let mut c = Array2::from_elem((labels.len(), k), 1.0 / k as f64);
    impose_training_labels(&mut c, labels, train)?;
    Ok(c)
}

/// Overwrites the rows of training nodes with their one-hot labels.
pub fn impose_training_labels(
    soft: &mut Array2<f64>,
    labels: &[Option<usize>],
    train: &[usize],
) -> Result<()> {
    for &i in train {
        let y = labels
            .get(i)
            .copied()
            .flatten()
            .ok_or_else(|| Error::InvalidArgument(format!("training node {i} is unlabeled")))?;
        let mut row = soft.row_mut(i);
        row.fill(0.0);
        row[y] = 1.0;
    }
    Ok(())
}
