use serde::{Deserialize, Serialize};

use crate::cmgnn::CmSnapshot;
use crate::error::{Error, Result};
use crate::graph::{knn_feature_graph, observed_cm, CompatibilityMatrix, Graph};

/// Cells are annotated with their value up to this many classes.
pub const ANNOTATE_MAX_CLASSES: usize = 12;
const CELL: usize = 40;
const MARGIN: usize = 30;

/// Row-major CSV with six decimals.
pub fn cm_csv(m: &CompatibilityMatrix) -> String {
    let mut s = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// White (0) to dark blue (1), linear per channel.
fn color(v: f64) -> String {
    let t = v.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(255.0, 8.0),
        lerp(255.0, 48.0),
        lerp(255.0, 107.0)
    )
}

/// Standalone SVG heatmap with a linear 0 to 1 colour scale.
pub fn cm_svg(m: &CompatibilityMatrix, title: &str) -> String {
    let k = m.n_classes();
    let size = 2 * MARGIN + k * CELL;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{}\" font-family=\"sans-serif\">\n",
        size + 20
    );
    s.push_str(&format!(
        "<text x=\"{MARGIN}\" y=\"18\" font-size=\"14\">{}</text>\n",
        xml_escape(title)
    ));
    for i in 0..k {
        for j in 0..k {
            let v = m.get(i, j);
            let (x, y) = (MARGIN + j * CELL, MARGIN + i * CELL);
            s.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{}\"/>\n",
                color(v)
            ));
            if k <= ANNOTATE_MAX_CLASSES {
                let fill = if v > 0.5 { "#ffffff" } else { "#000000" };
                s.push_str(&format!(
                    "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\" fill=\"{fill}\">{v:.3}</text>\n",
                    x + CELL / 2,
                    y + CELL / 2 + 4
                ));
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CmMode {
    Observed,
    Estimated,
    /// Observed matrix over the `k` most feature-similar nodes instead of the edges.
    KnnReneighbored {
        k: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmOutput {
    pub mode: CmMode,
    pub matrix: CompatibilityMatrix,
    /// Observed matrix for comparison in estimated mode.
    pub observed: Option<CompatibilityMatrix>,
    pub max_abs_diff: Option<f64>,
    pub diagonal_mean: f64,
}

/// Computes the matrix of `mode`; estimated mode reads it from a run snapshot.
pub fn cmd_cm(g: &Graph, mode: CmMode, estimate: Option<&CmSnapshot>) -> Result<CmOutput> {
    let (matrix, observed) = match mode {
        CmMode::Observed => (observed_cm(g)?, None),
        CmMode::Estimated => {
            let est = estimate.ok_or_else(|| {
                Error::InvalidArgument("estimated mode needs a trained CMGNN run artifact".into())
            })?;
            if est.m_hat.n_classes() != g.n_classes() {
                return Err(Error::Shape(format!(
                    "run artifact has {} classes, dataset {}",
                    est.m_hat.n_classes(),
                    g.n_classes()
                )));
            }
            (est.m_hat.clone(), Some(observed_cm(g)?))
        }
        CmMode::KnnReneighbored { k } => {
            let knn = knn_feature_graph(g, k)?;
            let h = Graph::from_parts(
                format!("{}-knn{k}", g.name()),
                knn,
                g.features().clone(),
                g.labels().to_vec(),
                g.n_classes(),
                true,
            )?;
            (observed_cm(&h)?, None)
        }
    };
    Ok(CmOutput {
        mode,
        max_abs_diff: observed.as_ref().map(|o| o.max_abs_diff(&matrix)),
        diagonal_mean: matrix.diagonal_mean(),
        matrix,
        observed,
    })
}
