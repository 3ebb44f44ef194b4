//! Synthetic graphs whose edges follow a target compatibility matrix.
//!
//! [`build_target_cm`] produces the `Easy` and `Hard` matrices of a homophily
//! level, [`gaussian_base`] draws labels and class-conditional Gaussian
//! features, and [`generate`] wires the edges: every node emits half its
//! target degree in stubs, picks the partner class from its matrix row and
//! the partner uniformly inside that class.

use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;
use crate::graph::{
    edge_homophily, observed_cm, save_dataset, CompatibilityMatrix, FeatureFormat, Graph, Split,
};
use crate::rng;

/// Resampling attempts per stub before the spec is declared infeasible.
pub const MAX_RETRIES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// Off-diagonal mass on the two ring neighbours `i - 1` and `i + 1`.
    Easy,
    /// Off-diagonal mass spread uniformly.
    Hard,
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Pattern::Easy),
            "hard" => Ok(Pattern::Hard),
            other => Err(Error::Config(format!(
                "unknown pattern {other:?} (easy|hard)"
            ))),
        }
    }
}

/// Compatibility matrix with diagonal `h` and off-diagonal mass laid out by `pattern`.
pub fn build_target_cm(k: usize, h: f64, pattern: Pattern) -> Result<CompatibilityMatrix> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two classes, got {k}"
        )));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "homophily {h} outside (0, 1)"
        )));
    }
    let off = 1.0 - h;
    let mut m = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        m[[i, i]] = h;
        match pattern {
            Pattern::Hard => {
                for j in (0..k).filter(|&j| j != i) {
                    m[[i, j]] = off / (k - 1) as f64;
                }
            }
            Pattern::Easy => {
                m[[i, (i + 1) % k]] += off / 2.0;
                m[[i, (i + k - 1) % k]] += off / 2.0;
            }
        }
    }
    CompatibilityMatrix::new(m)
}

/// Class-conditional spherical Gaussians with unit noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianBase {
    pub n_nodes: usize,
    pub n_classes: usize,
    pub n_features: usize,
    /// Euclidean distance between any two class means. The default puts an
    /// MLP at roughly 73% on the default base.
    pub separation: f64,
}

impl Default for GaussianBase {
    fn default() -> Self {
        Self {
            n_nodes: 1000,
            n_classes: 5,
            n_features: 32,
            separation: 3.0,
        }
    }
}

/// Balanced labels in shuffled order and features `mu_y + N(0, I)`, where the
/// class means are scaled orthogonal axes.
pub fn gaussian_base(cfg: &GaussianBase, seed: u64) -> Result<(Vec<usize>, Array2<f64>)> {
    if cfg.n_classes < 2 || cfg.n_features < cfg.n_classes || cfg.n_nodes < cfg.n_classes {
        return Err(Error::Config(format!(
            "gaussian base needs 2 <= classes <= min(features, nodes), got {} classes, {} features, {} nodes",
            cfg.n_classes, cfg.n_features, cfg.n_nodes
        )));
    }
    if cfg.separation.is_nan() || cfg.separation < 0.0 {
        return Err(Error::Config(format!(
            "separation {} must be >= 0",
            cfg.separation
        )));
    }
    let mut r = rng::seeded(seed, rng::stream::SYNTH_FEATURES);
    let mut labels: Vec<usize> = (0..cfg.n_nodes).map(|i| i % cfg.n_classes).collect();
    labels.shuffle(&mut r);
    let scale = cfg.separation / std::f64::consts::SQRT_2;
    let mut x = Array2::<f64>::zeros((cfg.n_nodes, cfg.n_features));
    for (i, mut row) in x.outer_iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v = r.sample(StandardNormal);
        }
        row[labels[i]] += scale;
    }
    Ok((labels, x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub name: String,
    pub target: CompatibilityMatrix,
    pub mean_degree: f64,
    pub labels: Vec<usize>,
    pub features: Array2<f64>,
    pub seed: u64,
}

/// Draws an undirected simple graph realising `spec.target` in expectation.
pub fn generate(spec: &SynthSpec) -> Result<Graph> {
    let n = spec.labels.len();
    let k = spec.target.n_classes();
    if spec.features.nrows() != n {
        return Err(Error::Shape(format!(
            "{} feature rows for {n} labels",
            spec.features.nrows()
        )));
    }
    if !spec.mean_degree.is_finite() || spec.mean_degree <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "mean degree {} must be positive",
            spec.mean_degree
        )));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &y) in spec.labels.iter().enumerate() {
        if y >= k {
            return Err(Error::Range(format!(
                "label {y} of node {i} with {k} classes"
            )));
        }
        members[y].push(i);
    }
    for a in 0..k {
        for b in 0..k {
            if spec.target.get(a, b) > 0.0 && !members[a].is_empty() && members[b].is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "class {a} sends mass to class {b}, which has no nodes"
                )));
            }
        }
    }
    let cdf: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            spec.target
                .row(a)
                .iter()
                .scan(0.0, |acc, &p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect()
        })
        .collect();

    let mut r = rng::seeded(spec.seed, rng::stream::SYNTH_EDGES);
    let half = spec.mean_degree / 2.0;
    let mut adj: Vec<std::collections::HashSet<usize>> = vec![Default::default(); n];
    let mut edges = Vec::new();
    for i in 0..n {
        let stubs = half.floor() as usize + usize::from(r.gen_bool(half.fract()));
        let row = &cdf[spec.labels[i]];
        for _ in 0..stubs {
            let mut placed = false;
            for _ in 0..MAX_RETRIES {
                let u: f64 = r.gen();
                let c = row.iter().position(|&p| u < p).unwrap_or(k - 1);
                let pool = &members[c];
                let j = pool[r.gen_range(0..pool.len())];
                if j != i && !adj[i].contains(&j) {
                    adj[i].insert(j);
                    adj[j].insert(i);
                    edges.push((i.min(j), i.max(j)));
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::InvalidArgument(format!(
                    "node {i}: no free partner after {MAX_RETRIES} attempts; the classes are too small for degree {}",
                    spec.mean_degree
                )));
            }
        }
    }
    Graph::from_edges(
        spec.name.clone(),
        n,
        &edges,
        spec.features.clone(),
        spec.labels.iter().map(|&y| Some(y)).collect(),
        k,
        false,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub edge_homophily: f64,
    pub mean_degree: f64,
    pub target: CompatibilityMatrix,
    pub observed: CompatibilityMatrix,
    /// Total-variation distance between matching rows of observed and target.
    pub row_tv: Vec<f64>,
    pub max_row_tv: f64,
}

pub fn verify(g: &Graph, target: &CompatibilityMatrix) -> Result<SynthReport> {
    let observed = observed_cm(g)?;
    let row_tv = observed.row_tv_distances(target)?;
    let n = g.n_nodes().max(1) as f64;
    Ok(SynthReport {
        edge_homophily: edge_homophily(g)?,
        mean_degree: g.degrees().iter().sum::<usize>() as f64 / n,
        max_row_tv: row_tv.iter().cloned().fold(0.0, f64::max),
        target: target.clone(),
        observed,
        row_tv,
    })
}

/// Writes the dataset directory plus `synth_report.json`.
pub fn write_dataset(g: &Graph, report: &SynthReport, dir: &Path, splits: &[Split]) -> Result<()> {
    save_dataset(g, dir, FeatureFormat::Tsv, splits)?;
    fsio::write_json(&dir.join("synth_report.json"), report)
}

/// Named homophily levels of the controlled experiment.
pub const HOMOPHILY_LEVELS: [(&str, f64); 3] = [("lowh", 0.2), ("midh", 0.5), ("highh", 0.8)];
/// Named mean degrees of the controlled experiment.
pub const DEGREE_LEVELS: [(&str, f64); 2] = [("lowdeg", 4.0), ("highdeg", 18.0)];

/// One cell of the homophily x pattern x degree grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub homophily: f64,
    pub pattern: Pattern,
    pub degree: f64,
}

impl GridCell {
    pub fn name(&self) -> String {
        let h = HOMOPHILY_LEVELS
            .iter()
            .find(|(_, v)| *v == self.homophily)
            .map(|(n, _)| n.to_string())
            .unwrap_or_else(|| format!("h{}", self.homophily));
        let d = DEGREE_LEVELS
            .iter()
            .find(|(_, v)| *v == self.degree)
            .map(|(n, _)| n.to_string())
            .unwrap_or_else(|| format!("deg{}", self.degree));
        let p = match self.pattern {
            Pattern::Easy => "easy",
            Pattern::Hard => "hard",
        };
        format!("{h}-{p}-{d}")
    }

    /// Generates this cell on a Gaussian base.
    pub fn generate(&self, base: &GaussianBase, seed: u64) -> Result<(Graph, SynthReport)> {
        let (labels, features) = gaussian_base(base, seed)?;
        let target = build_target_cm(base.n_classes, self.homophily, self.pattern)?;
        let spec = SynthSpec {
            name: self.name(),
            target: target.clone(),
            mean_degree: self.degree,
            labels,
            features,
            seed,
        };
        let g = generate(&spec)?;
        let report = verify(&g, &target)?;
        Ok((g, report))
    }
}

/// All twelve cells.
pub fn grid() -> Vec<GridCell> {
    let mut out = Vec::new();
    for &(_, h) in &HOMOPHILY_LEVELS {
        for pattern in [Pattern::Easy, Pattern::Hard] {
            for &(_, d) in &DEGREE_LEVELS {
                out.push(GridCell {
                    homophily: h,
                    pattern,
                    degree: d,
                });
            }
        }
    }
    out
}
