use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::rng;

/// Disjoint train / validation / test node sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl Split {
    /// Checks disjointness and bounds.
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        let mut seen = vec![false; n_nodes];
        for (set, name) in [
            (&self.train, "train"),
            (&self.valid, "valid"),
            (&self.test, "test"),
        ] {
            for &i in set {
                if i >= n_nodes {
                    return Err(Error::Range(format!(
                        "{name} index {i} outside [0, {n_nodes})"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidArgument(format!(
                        "node {i} appears in more than one split set"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(())
    }
}

/// 48/32/20 sizes by largest remainder: each set is within one node of its
/// exact share and the sizes sum to `n`.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let shares = [48, 32, 20];
    let mut sizes = shares.map(|p| n * p / 100);
    let mut order = [0, 1, 2];
    // stable sort keeps train before valid before test on equal remainders
    order.sort_by_key(|&i| std::cmp::Reverse(n * shares[i] % 100));
    let left = n - sizes.iter().sum::<usize>();
    for &i in order.iter().take(left) {
        sizes[i] += 1;
    }
    (sizes[0], sizes[1], sizes[2])
}

/// `n_splits` independent uniform 48/32/20 partitions, deterministic per
/// `(seed, split index)`.
pub fn generate_splits(g: &Graph, n_splits: usize, seed: u64) -> Result<Vec<Split>> {
    let n = g.n_nodes();
    if n_splits == 0 {
        return Err(Error::InvalidArgument("need at least one split".into()));
    }
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "splitting needs at least 10 nodes, got {n}"
        )));
    }
    let (n_train, n_valid, _) = split_sizes(n);
    Ok((0..n_splits)
        .map(|s| {
            let mut r = rng::derived(seed, rng::stream::SPLITS, s as u64);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut r);
            let mut train = order[..n_train].to_vec();
            let mut valid = order[n_train..n_train + n_valid].to_vec();
            let mut test = order[n_train + n_valid..].to_vec();
            train.sort_unstable();
            valid.sort_unstable();
            test.sort_unstable();
            Split {
                train,
                valid,
                test,
                seed,
            }
        })
        .collect())
}
