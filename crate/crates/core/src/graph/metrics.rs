use super::Graph;
use crate::error::{Error, Result};

/// Fraction of edges whose endpoints share a label.
///
/// Undirected edges are stored twice in the CSR but both copies agree, so the
/// ratio over stored entries equals the ratio over undirected edges. Directed
/// graphs count every stored entry.
pub fn edge_homophily(g: &Graph) -> Result<f64> {
    let labels = g.dense_labels()?;
    let adj = g.adjacency();
    if adj.nnz() == 0 {
        return Err(Error::InvalidArgument(
            "edge homophily of a graph without edges".into(),
        ));
    }
    let same = (0..g.n_nodes())
        .map(|u| {
            adj.row_indices(u)
                .iter()
                .filter(|&&v| labels[u] == labels[v])
                .count()
        })
        .sum::<usize>();
    Ok(same as f64 / adj.nnz() as f64)
}

/// Mean over non-isolated nodes of the fraction of same-label neighbours.
pub fn node_homophily(g: &Graph) -> Result<f64> {
    let labels = g.dense_labels()?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for u in 0..g.n_nodes() {
        let nbrs = g.neighbors(u);
        if nbrs.is_empty() {
            continue;
        }
        let same = nbrs.iter().filter(|&&v| labels[v] == labels[u]).count();
        total += same as f64 / nbrs.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::InvalidArgument(
            "node homophily undefined: every node is isolated".into(),
        ));
    }
    Ok(total / counted as f64)
}
