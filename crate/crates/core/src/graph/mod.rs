//! Graph data model and the structural statistics computed on it.

mod cm;
mod io;
mod metrics;
mod neighborhood;
mod split;

pub(crate) use cm::l1_normalize_rows;
pub use cm::{observed_cm, one_hot, semantic_neighborhood, CompatibilityMatrix};
pub use io::{load_dataset, load_splits, save_dataset, save_splits, DatasetMeta, FeatureFormat};
pub use metrics::{edge_homophily, node_homophily};
pub use neighborhood::{khop_adjacency, knn_feature_graph, HopMode};
pub use split::{generate_splits, split_sizes, Split};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Immutable attributed graph.
///
/// The adjacency is a binary CSR matrix without self-loops. Undirected graphs
/// store both directions of every edge, so the matrix is exactly symmetric.
#[derive(Debug, Clone)]
pub struct Graph {
    name: String,
    adjacency: SparseMatrix,
    features: Array2<f64>,
    labels: Vec<Option<usize>>,
    n_classes: usize,
    directed: bool,
}

impl Graph {
    /// Builds a graph from an edge list. Self-loops and repeated edges are
    /// dropped; for undirected graphs `(u, v)` and `(v, u)` describe the same edge.
    pub fn from_edges(
        name: impl Into<String>,
        n_nodes: usize,
        edges: &[(usize, usize)],
        features: Array2<f64>,
        labels: Vec<Option<usize>>,
        n_classes: usize,
        directed: bool,
    ) -> Result<Self> {
        let mut trip = Vec::with_capacity(edges.len() * if directed { 1 } else { 2 });
        for &(u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::Range(format!(
                    "edge ({u}, {v}) references a node outside [0, {n_nodes})"
                )));
            }
            if u == v {
                continue;
            }
            trip.push((u, v, 1.0));
            if !directed {
                trip.push((v, u, 1.0));
            }
        }
        let adjacency = SparseMatrix::from_triplets(n_nodes, n_nodes, trip)?.pattern();
        Self::from_parts(name, adjacency, features, labels, n_classes, directed)
    }

    /// Builds a graph from a prepared adjacency, checking every invariant.
    pub fn from_parts(
        name: impl Into<String>,
        adjacency: SparseMatrix,
        features: Array2<f64>,
        labels: Vec<Option<usize>>,
        n_classes: usize,
        directed: bool,
    ) -> Result<Self> {
        let n = adjacency.rows();
        if adjacency.cols() != n {
            return Err(Error::Shape(format!(
                "adjacency must be square, got {:?}",
                adjacency.shape()
            )));
        }
        if features.nrows() != n {
            return Err(Error::Shape(format!(
                "feature matrix has {} rows for {n} nodes",
                features.nrows()
            )));
        }
        if labels.len() != n {
            return Err(Error::Shape(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        if let Some((i, k)) = labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|&k| k >= n_classes).map(|k| (i, k)))
        {
            return Err(Error::Range(format!(
                "node {i} has label {k} but the graph has {n_classes} classes"
            )));
        }
        if adjacency.values().iter().any(|&w| w != 1.0) {
            return Err(Error::InvalidArgument("adjacency must be binary".into()));
        }
        if (0..n).any(|i| adjacency.contains(i, i)) {
            return Err(Error::InvalidArgument(
                "adjacency must not contain self-loops".into(),
            ));
        }
        if !directed && !adjacency.is_symmetric() {
            return Err(Error::InvalidArgument(
                "undirected graph with an asymmetric adjacency".into(),
            ));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite feature value".into()));
        }
        Ok(Self {
            name: name.into(),
            adjacency,
            features,
            labels,
            n_classes,
            directed,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    /// Edge count: undirected edges are counted once.
    pub fn n_edges(&self) -> usize {
        if self.directed {
            self.adjacency.nnz()
        } else {
            self.adjacency.nnz() / 2
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> Option<usize> {
        self.labels[node]
    }

    /// All labels, failing on the first unlabeled node.
    pub fn dense_labels(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| l.ok_or_else(|| Error::InvalidArgument(format!("node {i} is unlabeled"))))
            .collect()
    }

    /// Out-neighbours of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        self.adjacency.row_indices(node)
    }

    /// Out-degrees.
    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.row_nnz()
    }

    /// `D^{-1} A` without self-loops.
    pub fn row_normalized_adjacency(&self) -> SparseMatrix {
        self.adjacency.row_normalize()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Relabels nodes so that old node `perm[i]` becomes new node `i`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_nodes();
        let mut inverse = vec![usize::MAX; n];
        if perm.len() != n {
            return Err(Error::Shape(format!(
                "permutation of length {} for {n} nodes",
                perm.len()
            )));
        }
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            inverse[old] = new;
        }
        let trip = (0..n).flat_map(|old_r| {
            let inverse = &inverse;
            self.adjacency
                .row_indices(old_r)
                .iter()
                .map(move |&old_c| (inverse[old_r], inverse[old_c], 1.0))
        });
        let adjacency = SparseMatrix::from_triplets(n, n, trip)?;
        let features = self.features.select(ndarray::Axis(0), perm);
        let labels = perm.iter().map(|&old| self.labels[old]).collect();
        Self::from_parts(
            self.name.clone(),
            adjacency,
            features,
            labels,
            self.n_classes,
            self.directed,
        )
    }

    /// Applies a class relabelling `map[old] = new` to every labeled node.
    pub fn permute_classes(&self, map: &[usize]) -> Result<Self> {
        if map.len() != self.n_classes {
            return Err(Error::Shape("class map length differs from K".into()));
        }
        let labels = self.labels.iter().map(|l| l.map(|k| map[k])).collect();
        Self::from_parts(
            self.name.clone(),
            self.adjacency.clone(),
            self.features.clone(),
            labels,
            self.n_classes,
            self.directed,
        )
    }
}
