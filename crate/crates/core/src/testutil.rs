use ndarray::Array2;
use rand::Rng;

use crate::graph::Graph;
use crate::rng;

/// Erdős–Rényi graph with Gaussian-ish features and uniform labels.
pub fn random_graph(n: usize, p: f64, d_f: usize, k: usize, seed: u64) -> Graph {
    let mut r = rng::derived(seed, 99, n as u64);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if r.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    let features = Array2::from_shape_fn((n, d_f), |_| r.gen_range(-1.0..1.0));
    let labels = (0..n).map(|_| Some(r.gen_range(0..k))).collect();
    Graph::from_edges("random", n, &edges, features, labels, k, false).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::derived(seed, 98, (rows * 1000 + cols) as u64);
    Array2::from_shape_fn((rows, cols), |_| r.gen_range(-1.0..1.0))
}

/// A random permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng::derived(seed, 97, 0));
    p
}
