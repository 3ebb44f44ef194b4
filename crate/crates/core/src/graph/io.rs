//! Dataset directory format.
//!
//! ```text
//! meta.json            {"name", "n_nodes", "n_classes", "d_f", "directed"}
//! edges.tsv            u<TAB>v per line, 0-indexed (one line per undirected edge)
//! labels.tsv           one integer per line, -1 for unlabeled
//! features.tsv         tab-separated reals, one row per node
//!   or features.f32    "GF32", rows u64 LE, cols u64 LE, row-major f32 LE
//! splits/split_<k>.json {"train": [...], "valid": [...], "test": [...]}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Graph, Split};
use crate::error::{Error, Result};
use crate::fsio;

const F32_MAGIC: &[u8; 4] = b"GF32";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub n_nodes: usize,
    pub n_classes: usize,
    pub d_f: usize,
    pub directed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Tsv,
    F32,
}

fn parse_err(file: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    content_lines(&text)
        .map(|(ln, line)| {
            let mut parts = line.split_whitespace();
            let mut next = |what: &str| -> Result<usize> {
                parts
                    .next()
                    .ok_or_else(|| parse_err(path, ln, format!("missing {what} endpoint")))?
                    .parse::<usize>()
                    .map_err(|e| parse_err(path, ln, format!("bad {what} endpoint: {e}")))
            };
            let u = next("source")?;
            let v = next("target")?;
            if parts.next().is_some() {
                return Err(parse_err(path, ln, "expected exactly two columns"));
            }
            Ok((u, v))
        })
        .collect()
}

fn read_labels(path: &Path, n_classes: usize) -> Result<Vec<Option<usize>>> {
    let text = read_text(path)?;
    content_lines(&text)
        .map(|(ln, line)| {
            let v: i64 = line
                .parse()
                .map_err(|e| parse_err(path, ln, format!("bad label: {e}")))?;
            match v {
                -1 => Ok(None),
                v if v >= 0 && (v as usize) < n_classes => Ok(Some(v as usize)),
                v => Err(Error::Range(format!(
                    "{}:{ln}: label {v} outside [0, {n_classes})",
                    path.display()
                ))),
            }
        })
        .collect()
}

fn read_features_tsv(path: &Path) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (ln, line) in content_lines(&text) {
        let before = data.len();
        for tok in line.split('\t') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|e| parse_err(path, ln, format!("bad feature value {tok:?}: {e}")))?;
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(parse_err(
                    path,
                    ln,
                    format!("row has {width} columns, expected {c}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), data)
        .map_err(|e| Error::Shape(format!("{}: {e}", path.display())))
}

fn read_features_f32(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 || &bytes[..4] != F32_MAGIC {
        return Err(parse_err(path, 0, "missing GF32 header"));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = &bytes[20..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| parse_err(path, 0, "header dimensions overflow"))?;
    if body.len() != expected {
        return Err(parse_err(
            path,
            0,
            format!(
                "{rows}x{cols} header needs {expected} payload bytes, found {}",
                body.len()
            ),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::Shape(format!("{}: {e}", path.display())))
}

fn encode_features_f32(x: &Array2<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + x.len() * 4);
    out.extend_from_slice(F32_MAGIC);
    out.extend_from_slice(&(x.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(x.ncols() as u64).to_le_bytes());
    for v in x.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<Graph> {
    let meta: DatasetMeta = fsio::read_json(&dir.join("meta.json"))?;
    let edges = read_edges(&dir.join("edges.tsv"))?;
    let labels = read_labels(&dir.join("labels.tsv"), meta.n_classes)?;
    let f32_path = dir.join("features.f32");
    let features = if f32_path.exists() {
        read_features_f32(&f32_path)?
    } else {
        read_features_tsv(&dir.join("features.tsv"))?
    };
    if labels.len() != meta.n_nodes {
        return Err(Error::Shape(format!(
            "labels.tsv has {} rows, meta.json declares {} nodes",
            labels.len(),
            meta.n_nodes
        )));
    }
    if features.dim() != (meta.n_nodes, meta.d_f) {
        return Err(Error::Shape(format!(
            "features are {}x{}, meta.json declares {}x{}",
            features.nrows(),
            features.ncols(),
            meta.n_nodes,
            meta.d_f
        )));
    }
    Graph::from_edges(
        meta.name,
        meta.n_nodes,
        &edges,
        features,
        labels,
        meta.n_classes,
        meta.directed,
    )
}

fn split_path(dir: &Path, k: usize) -> PathBuf {
    dir.join("splits").join(format!("split_{k}.json"))
}

/// Reads `splits/split_0.json`, `split_1.json`, ... until the first gap.
pub fn load_splits(dir: &Path, n_nodes: usize) -> Result<Vec<Split>> {
    let mut out = Vec::new();
    loop {
        let path = split_path(dir, out.len());
        if !path.exists() {
            break;
        }
        let split: Split = fsio::read_json(&path)?;
        split.validate(n_nodes)?;
        out.push(split);
    }
    Ok(out)
}

pub fn save_splits(dir: &Path, splits: &[Split]) -> Result<()> {
    for (k, s) in splits.iter().enumerate() {
        fsio::write_json(&split_path(dir, k), s)?;
    }
    Ok(())
}

/// Writes `g` (and optionally its splits) in the dataset directory format.
pub fn save_dataset(g: &Graph, dir: &Path, format: FeatureFormat, splits: &[Split]) -> Result<()> {
    let meta = DatasetMeta {
        name: g.name().to_string(),
        n_nodes: g.n_nodes(),
        n_classes: g.n_classes(),
        d_f: g.n_features(),
        directed: g.is_directed(),
    };
    fsio::write_json(&dir.join("meta.json"), &meta)?;

    let mut edges = String::new();
    for u in 0..g.n_nodes() {
        for &v in g.neighbors(u) {
            if g.is_directed() || u < v {
                edges.push_str(&format!("{u}\t{v}\n"));
            }
        }
    }
    fsio::write_atomic(&dir.join("edges.tsv"), edges.as_bytes())?;

    let labels: String = g
        .labels()
        .iter()
        .map(|l| match l {
            Some(k) => format!("{k}\n"),
            None => "-1\n".to_string(),
        })
        .collect();
    fsio::write_atomic(&dir.join("labels.tsv"), labels.as_bytes())?;

    match format {
        FeatureFormat::F32 => fsio::write_atomic(
            &dir.join("features.f32"),
            &encode_features_f32(g.features()),
        )?,
        FeatureFormat::Tsv => {
            let mut text = String::new();
            for row in g.features().outer_iter() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                text.push_str(&cells.join("\t"));
                text.push('\n');
            }
            fsio::write_atomic(&dir.join("features.tsv"), text.as_bytes())?
        }
    }
    save_splits(dir, splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn path_dataset(dir: &Path) {
        write(
            dir,
            "meta.json",
            r#"{"name":"path","n_nodes":3,"n_classes":2,"d_f":2,"directed":false}"#,
        );
        write(dir, "edges.tsv", "0\t1\n1\t2\n");
        write(dir, "labels.tsv", "0\n1\n-1\n");
        write(dir, "features.tsv", "1\t0\n0.5\t0.5\n0\t1\n");
    }

    #[test]
    fn loads_tsv_path_graph() {
        let dir = tempfile::tempdir().unwrap();
        path_dataset(dir.path());
        let g = load_dataset(dir.path()).unwrap();
        assert_eq!(g.adjacency().nnz(), 4);
        assert_eq!(g.degrees(), vec![1, 2, 1]);
        assert_eq!(g.labels(), &[Some(0), Some(1), None]);
        assert_eq!(g.features()[[1, 1]], 0.5);
    }

    #[test]
    fn parse_error_names_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        path_dataset(dir.path());
        write(dir.path(), "edges.tsv", "0\t1\n1\tx\n");
        let err = load_dataset(dir.path()).unwrap_err();
        match err {
            Error::Parse { file, line, .. } => {
                assert!(file.ends_with("edges.tsv"));
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn label_out_of_range_is_range_error() {
        let dir = tempfile::tempdir().unwrap();
        path_dataset(dir.path());
        write(dir.path(), "labels.tsv", "0\n2\n1\n");
        assert!(matches!(load_dataset(dir.path()), Err(Error::Range(_))));
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        path_dataset(dir.path());
        write(dir.path(), "features.tsv", "1\t0\n0\t1\n");
        assert!(matches!(load_dataset(dir.path()), Err(Error::Shape(_))));
    }

    #[test]
    fn f32_roundtrip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        path_dataset(dir.path());
        let g = load_dataset(dir.path()).unwrap();
        let out = dir.path().join("copy");
        save_dataset(&g, &out, FeatureFormat::F32, &[]).unwrap();
        let bytes = fs::read(out.join("features.f32")).unwrap();
        assert_eq!(&bytes[..4], b"GF32");
        assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 20 + 3 * 2 * 4);
        let back = load_dataset(&out).unwrap();
        assert_eq!(back.adjacency(), g.adjacency());
        assert_eq!(back.features(), g.features());
        assert_eq!(back.labels(), g.labels());
    }

    #[test]
    fn truncated_f32_rejected() {
        let dir = tempfile::tempdir().unwrap();
        path_dataset(dir.path());
        let mut bytes = encode_features_f32(&Array2::zeros((3, 2)));
        bytes.pop();
        fs::write(dir.path().join("features.f32"), bytes).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Parse { .. })));
    }

    #[test]
    fn splits_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let s = vec![Split {
            train: vec![0],
            valid: vec![1],
            test: vec![2],
            seed: 3,
        }];
        save_splits(dir.path(), &s).unwrap();
        assert_eq!(load_splits(dir.path(), 3).unwrap(), s);
        assert!(load_splits(dir.path(), 2).is_err());
    }
}
