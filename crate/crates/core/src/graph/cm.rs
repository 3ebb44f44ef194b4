use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// Tolerance on row sums of a compatibility matrix.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// `K x K` row-stochastic class-connection preference.
///
/// Row `k` is the expected neighbour-class distribution of a class-`k` node.
/// Rows whose pre-normalisation mass was zero are replaced by the uniform
/// distribution and listed in [`fallback_rows`](Self::fallback_rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityMatrix {
    matrix: Vec<Vec<f64>>,
    fallback_rows: Vec<usize>,
}

impl CompatibilityMatrix {
    /// Wraps a row-stochastic matrix, validating it.
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        let (k, c) = matrix.dim();
        if k != c || k == 0 {
            return Err(Error::Shape(format!(
                "compatibility matrix must be square and non-empty, got {k}x{c}"
            )));
        }
        for (r, row) in matrix.outer_iter().enumerate() {
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "row {r} has a negative or non-finite entry"
                )));
            }
            let s: f64 = row.sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!("row {r} sums to {s}")));
            }
        }
        Ok(Self {
            matrix: matrix.outer_iter().map(|r| r.to_vec()).collect(),
            fallback_rows: Vec::new(),
        })
    }

    /// L1-normalises the rows of a non-negative mass matrix. Zero rows become
    /// uniform and are flagged.
    pub fn from_mass(mass: ArrayView2<'_, f64>) -> Result<Self> {
        let (k, c) = mass.dim();
        if k != c || k == 0 {
            return Err(Error::Shape(format!(
                "compatibility mass must be square and non-empty, got {k}x{c}"
            )));
        }
        let mut matrix = Vec::with_capacity(k);
        let mut fallback_rows = Vec::new();
        for (r, row) in mass.outer_iter().enumerate() {
            if row.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "compatibility mass row {r} has a negative or non-finite entry"
                )));
            }
            let s: f64 = row.sum();
            if s > 0.0 {
                matrix.push(row.iter().map(|v| v / s).collect());
            } else {
                matrix.push(vec![1.0 / k as f64; k]);
                fallback_rows.push(r);
            }
        }
        Ok(Self {
            matrix,
            fallback_rows,
        })
    }

    pub fn identity(k: usize) -> Self {
        let matrix = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            matrix,
            fallback_rows: Vec::new(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.matrix.len()
    }

    pub fn to_array(&self) -> Array2<f64> {
        let k = self.n_classes();
        Array2::from_shape_fn((k, k), |(i, j)| self.matrix[i][j])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i][j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn fallback_rows(&self) -> &[usize] {
        &self.fallback_rows
    }

    pub fn diagonal_mean(&self) -> f64 {
        let k = self.n_classes();
        (0..k).map(|i| self.matrix[i][i]).sum::<f64>() / k as f64
    }

    /// Total-variation distance between row `i` of `self` and row `i` of `other`.
    pub fn row_tv_distances(&self, other: &CompatibilityMatrix) -> Result<Vec<f64>> {
        if self.n_classes() != other.n_classes() {
            return Err(Error::Shape("compatibility matrices of different K".into()));
        }
        Ok(self
            .matrix
            .iter()
            .zip(&other.matrix)
            .map(|(a, b)| tv_distance(a, b))
            .collect())
    }

    /// Smallest total-variation distance between two distinct rows.
    pub fn min_inter_row_tv(&self) -> f64 {
        let k = self.n_classes();
        let mut best = f64::INFINITY;
        for i in 0..k {
            for j in (i + 1)..k {
                best = best.min(tv_distance(&self.matrix[i], &self.matrix[j]));
            }
        }
        best
    }

    pub fn max_abs_diff(&self, other: &CompatibilityMatrix) -> f64 {
        self.matrix
            .iter()
            .flatten()
            .zip(other.matrix.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `N x K` one-hot encoding; unlabeled nodes get zero rows.
pub fn one_hot(labels: &[Option<usize>], n_classes: usize) -> Array2<f64> {
    let mut out = Array2::zeros((labels.len(), n_classes));
    for (i, l) in labels.iter().enumerate() {
        if let Some(k) = l {
            out[[i, *k]] = 1.0;
        }
    }
    out
}

/// Per-node neighbour-class proportions `D^{-1} A C`, L1-normalised per row.
///
/// Isolated nodes (and nodes whose neighbours carry no mass) get zero rows.
pub fn semantic_neighborhood(g: &Graph, soft_labels: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if soft_labels.nrows() != g.n_nodes() {
        return Err(Error::Shape(format!(
            "soft labels have {} rows for {} nodes",
            soft_labels.nrows(),
            g.n_nodes()
        )));
    }
    if soft_labels.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "soft labels must be non-negative and finite".into(),
        ));
    }
    let mut nb = g.adjacency().spmm(soft_labels)?;
    l1_normalize_rows(&mut nb);
    Ok(nb)
}

/// In-place L1 row normalisation; zero rows are left as zeros.
pub(crate) fn l1_normalize_rows(m: &mut Array2<f64>) {
    for mut row in m.outer_iter_mut() {
        let s: f64 = row.iter().map(|v| v.abs()).sum();
        if s > 0.0 {
            row.mapv_inplace(|v| v / s);
        }
    }
}

/// Observed compatibility matrix `Norm(C^T C^nb)` from the full labels.
pub fn observed_cm(g: &Graph) -> Result<CompatibilityMatrix> {
    let k = g.n_classes();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "a compatibility matrix needs at least two classes, got {k}"
        )));
    }
    let labels = g.dense_labels()?;
    let c = one_hot(g.labels(), k);
    let nb = semantic_neighborhood(g, c.view())?;
    let mut mass = Array2::<f64>::zeros((k, k));
    for (i, &y) in labels.iter().enumerate() {
        mass.row_mut(y).scaled_add(1.0, &nb.row(i));
    }
    CompatibilityMatrix::from_mass(mass.view())
}
