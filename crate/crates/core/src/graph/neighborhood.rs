use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Which hop distances a k-hop indicator keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HopMode {
    /// Every node at distance `1..=k`.
    #[default]
    Within,
    /// Only nodes at distance exactly `k`.
    Exact,
}

/// Binary indicator of nodes reachable within `k` hops (self excluded).
pub fn khop_adjacency(g: &Graph, k: usize, mode: HopMode) -> Result<SparseMatrix> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "k-hop adjacency needs k >= 2, got {k}"
        )));
    }
    let n = g.n_nodes();
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|src| {
            let mut dist = vec![usize::MAX; n];
            let mut queue = VecDeque::from([src]);
            dist[src] = 0;
            let mut hits = Vec::new();
            while let Some(u) = queue.pop_front() {
                let d = dist[u];
                if d == k {
                    continue;
                }
                for &v in g.neighbors(u) {
                    if dist[v] == usize::MAX {
                        dist[v] = d + 1;
                        let keep = match mode {
                            HopMode::Within => true,
                            HopMode::Exact => d + 1 == k,
                        };
                        if keep {
                            hits.push(v);
                        }
                        queue.push_back(v);
                    }
                }
            }
            hits.sort_unstable();
            hits
        })
        .collect();
    let trip = rows
        .iter()
        .enumerate()
        .flat_map(|(r, cols)| cols.iter().map(move |&c| (r, c, 1.0)));
    SparseMatrix::from_triplets(n, n, trip)
}

/// Directed k-nearest-neighbour graph under cosine similarity of features.
///
/// Self is excluded, ties are broken by ascending node index, and zero-norm
/// rows have similarity 0 to every node.
pub fn knn_feature_graph(g: &Graph, k: usize) -> Result<SparseMatrix> {
    let n = g.n_nodes();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k-NN graph needs 1 <= k < n_nodes ({n}), got {k}"
        )));
    }
    let x = g.features();
    let norms: Vec<f64> = x.outer_iter().map(|r| r.dot(&r).sqrt()).collect();
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let mut sims: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let denom = norms[i] * norms[j];
                    let s = if denom > 0.0 {
                        xi.dot(&x.row(j)) / denom
                    } else {
                        0.0
                    };
                    (s, j)
                })
                .collect();
            sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut picked: Vec<usize> = sims.into_iter().take(k).map(|(_, j)| j).collect();
            picked.sort_unstable();
            picked
        })
        .collect();
    let trip = rows
        .iter()
        .enumerate()
        .flat_map(|(r, cols)| cols.iter().map(move |&c| (r, c, 1.0)));
    SparseMatrix::from_triplets(n, n, trip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn unlabeled(n: usize, edges: &[(usize, usize)], features: Array2<f64>) -> Graph {
        Graph::from_edges("t", n, edges, features, vec![None; n], 2, false).unwrap()
    }

    #[test]
    fn path_two_hop() {
        let g = unlabeled(3, &[(0, 1), (1, 2)], Array2::zeros((3, 1)));
        let a2 = khop_adjacency(&g, 2, HopMode::Within).unwrap();
        assert!(a2.contains(0, 2) && a2.contains(2, 0));
        assert_eq!(a2.nnz(), 6);
        let exact = khop_adjacency(&g, 2, HopMode::Exact).unwrap();
        assert_eq!(exact.nnz(), 2);
        assert!(!exact.contains(0, 1));
    }

    #[test]
    fn complete_graph_two_hop_is_one_hop() {
        let edges: Vec<_> = (0..5)
            .flat_map(|i| ((i + 1)..5).map(move |j| (i, j)))
            .collect();
        let g = unlabeled(5, &edges, Array2::zeros((5, 1)));
        let a2 = khop_adjacency(&g, 2, HopMode::Within).unwrap();
        assert_eq!(&a2, g.adjacency());
    }

    #[test]
    fn khop_rejects_small_k() {
        let g = unlabeled(2, &[(0, 1)], Array2::zeros((2, 1)));
        assert!(khop_adjacency(&g, 1, HopMode::Within).is_err());
    }

    #[test]
    fn knn_orthogonal_ties_by_index() {
        let g = unlabeled(3, &[], Array2::eye(3));
        let a = knn_feature_graph(&g, 1).unwrap();
        assert!(a.contains(0, 1));
        assert!(a.contains(1, 0));
        assert!(a.contains(2, 0));
    }

    #[test]
    fn knn_duplicates_pick_each_other() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        let g = unlabeled(4, &[], x);
        let a = knn_feature_graph(&g, 1).unwrap();
        assert!(a.contains(0, 2) && a.contains(2, 0));
        assert!(a.contains(1, 3) && a.contains(3, 1));
    }

    #[test]
    fn knn_zero_norm_row_uses_tie_break() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]];
        let g = unlabeled(3, &[], x);
        let a = knn_feature_graph(&g, 1).unwrap();
        assert!(a.contains(0, 1));
        // node 2's best is the zero row (sim 0) over node 1 (sim -1)
        assert!(a.contains(2, 0));
    }

    #[test]
    fn knn_bad_k() {
        let g = unlabeled(3, &[], Array2::eye(3));
        assert!(knn_feature_graph(&g, 0).is_err());
        assert!(knn_feature_graph(&g, 3).is_err());
    }
}
