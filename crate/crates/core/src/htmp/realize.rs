use std::collections::HashMap;
use std::sync::Arc;

use super::spec::{GuidanceKind, IndicatorKind, MessagePassingSpec};
use crate::error::{Error, Result};
use crate::graph::{khop_adjacency, knn_feature_graph, Graph};
use crate::sparse::SparseMatrix;

/// A channel's realised `A_r ⊙ B_r`.
#[derive(Debug, Clone)]
pub enum Propagation {
    /// `I`: aggregation is skipped.
    Identity,
    Sparse(Arc<SparseMatrix>),
}

impl Propagation {
    pub fn to_dense(&self, n: usize) -> ndarray::Array2<f64> {
        match self {
            Propagation::Identity => ndarray::Array2::eye(n),
            Propagation::Sparse(m) => m.to_dense(),
        }
    }
}

/// Binary indicator matrix of `kind` on `g`.
pub fn realize_indicator(g: &Graph, kind: &IndicatorKind) -> Result<SparseMatrix> {
    let n = g.n_nodes();
    match kind {
        IndicatorKind::Identity => Ok(SparseMatrix::identity(n)),
        IndicatorKind::Raw => Ok(g.adjacency().clone()),
        IndicatorKind::RawSelfLoop => g.adjacency().add_self_loops(),
        IndicatorKind::KHop { k, mode } => khop_adjacency(g, *k, *mode),
        IndicatorKind::FeatureKnn { k } => knn_feature_graph(g, *k),
        IndicatorKind::Full => {
            SparseMatrix::from_triplets(n, n, (0..n).flat_map(|i| (0..n).map(move |j| (i, j, 1.0))))
        }
        IndicatorKind::Supplementary => Err(Error::InvalidArgument(
            "the supplementary indicator is bound by CMGNN, not by a generic spec".into(),
        )),
    }
}

/// Applies `guidance` over the support of the binary `indicator`.
pub fn apply_guidance(indicator: &SparseMatrix, guidance: &GuidanceKind) -> Result<SparseMatrix> {
    match guidance {
        GuidanceKind::Identity => {
            let n = indicator.rows();
            let trip = (0..n)
                .filter(|&i| indicator.contains(i, i))
                .map(|i| (i, i, 1.0));
            SparseMatrix::from_triplets(n, indicator.cols(), trip)
        }
        GuidanceKind::DegAvgRow => Ok(indicator.row_normalize()),
        GuidanceKind::DegAvgSym => indicator.sym_normalize(),
        GuidanceKind::HighPass => indicator.sym_normalize()?.identity_minus(),
        GuidanceKind::Constant { entries } => {
            let (r, c) = indicator.shape();
            if let Some(&(i, j, _)) = entries.iter().find(|&&(i, j, _)| i >= r || j >= c) {
                return Err(Error::Range(format!(
                    "constant guidance entry ({i}, {j}) outside {r}x{c}"
                )));
            }
            let b = SparseMatrix::from_triplets(r, c, entries.iter().copied())?;
            indicator.hadamard(&b)
        }
    }
}

/// Realises one (indicator, guidance) pair.
pub fn realize_channel(
    g: &Graph,
    indicator: &IndicatorKind,
    guidance: &GuidanceKind,
) -> Result<Propagation> {
    if *indicator == IndicatorKind::Identity
        && matches!(
            guidance,
            GuidanceKind::Identity | GuidanceKind::DegAvgRow | GuidanceKind::DegAvgSym
        )
    {
        return Ok(Propagation::Identity);
    }
    let a = realize_indicator(g, indicator)?;
    Ok(Propagation::Sparse(Arc::new(apply_guidance(&a, guidance)?)))
}

/// Every channel of a spec realised on one graph. Identical channels share
/// one matrix.
#[derive(Debug, Clone)]
pub struct BoundStructure {
    pub(crate) layers: Vec<Vec<Propagation>>,
    pub(crate) degrees: ndarray::Array2<f64>,
    n_nodes: usize,
}

impl BoundStructure {
    pub fn new(spec: &MessagePassingSpec, g: &Graph) -> Result<Self> {
        let mut cache: HashMap<String, Propagation> = HashMap::new();
        let mut layers = Vec::with_capacity(spec.layers.len());
        for layer in &spec.layers {
            let mut chans = Vec::with_capacity(layer.channels.len());
            for ch in &layer.channels {
                let key = serde_json::to_string(&(&ch.indicator, &ch.guidance))
                    .map_err(|e| Error::Config(e.to_string()))?;
                let p = match cache.get(&key) {
                    Some(p) => p.clone(),
                    None => {
                        let p = realize_channel(g, &ch.indicator, &ch.guidance)?;
                        cache.insert(key, p.clone());
                        p
                    }
                };
                chans.push(p);
            }
            layers.push(chans);
        }
        let degrees = ndarray::Array2::from_shape_fn((g.n_nodes(), 1), |(i, _)| {
            g.adjacency().row_indices(i).len() as f64
        });
        Ok(Self {
            layers,
            degrees,
            n_nodes: g.n_nodes(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn propagation(&self, layer: usize, channel: usize) -> &Propagation {
        &self.layers[layer][channel]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::HopMode;
    use ndarray::Array2;

    fn triangle() -> Graph {
        Graph::from_edges(
            "tri",
            3,
            &[(0, 1), (1, 2), (0, 2)],
            Array2::eye(3),
            vec![Some(0); 3],
            2,
            false,
        )
        .unwrap()
    }

    #[test]
    fn self_loop_sym_on_triangle_is_one_third() {
        let p = realize_channel(
            &triangle(),
            &IndicatorKind::RawSelfLoop,
            &GuidanceKind::DegAvgSym,
        )
        .unwrap();
        let d = p.to_dense(3);
        assert!(d.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn identity_short_circuits() {
        let p = realize_channel(
            &triangle(),
            &IndicatorKind::Identity,
            &GuidanceKind::DegAvgSym,
        )
        .unwrap();
        assert!(matches!(p, Propagation::Identity));
    }

    #[test]
    fn identity_guidance_masks_diagonal() {
        let a = realize_indicator(&triangle(), &IndicatorKind::RawSelfLoop).unwrap();
        let b = apply_guidance(&a, &GuidanceKind::Identity).unwrap();
        assert_eq!(b, SparseMatrix::identity(3));
        let raw = realize_indicator(&triangle(), &IndicatorKind::Raw).unwrap();
        assert_eq!(
            apply_guidance(&raw, &GuidanceKind::Identity).unwrap().nnz(),
            0
        );
    }

    #[test]
    fn high_pass_on_triangle() {
        let p = realize_channel(&triangle(), &IndicatorKind::Raw, &GuidanceKind::HighPass).unwrap();
        let d = p.to_dense(3);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { -0.5 };
                assert!((d[[i, j]] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_guidance_is_masked() {
        let a = realize_indicator(&triangle(), &IndicatorKind::Raw).unwrap();
        let b = apply_guidance(
            &a,
            &GuidanceKind::Constant {
                entries: vec![(0, 1, 2.0), (0, 0, 5.0)],
            },
        )
        .unwrap();
        assert_eq!(b.nnz(), 1);
        assert_eq!(b.get(0, 1), 2.0);
        assert!(apply_guidance(
            &a,
            &GuidanceKind::Constant {
                entries: vec![(3, 0, 1.0)]
            }
        )
        .is_err());
    }

    #[test]
    fn full_and_khop() {
        let g = triangle();
        assert_eq!(
            realize_indicator(&g, &IndicatorKind::Full).unwrap().nnz(),
            9
        );
        let k = realize_indicator(
            &g,
            &IndicatorKind::KHop {
                k: 2,
                mode: HopMode::Within,
            },
        )
        .unwrap();
        assert_eq!(&k, g.adjacency());
        assert!(realize_indicator(&g, &IndicatorKind::Supplementary).is_err());
    }
}
