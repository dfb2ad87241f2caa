//! Penultimate-embedding extraction, 2-D projection and class-separation scoring.

mod pca;
mod silhouette;
mod tsne;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use pca::{pca_2d, PcaOutput};
pub use silhouette::separation_score;
pub use tsne::{affinities, squared_distances, tsne_2d, Affinities, TsneOutput, TsneParams, ENTROPY_TOL};

use crate::error::{Error, Result};
use crate::eval::FoldResult;
use crate::model::TrainedModel;
use crate::numkit::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Raw,
    Embedding,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Raw => "raw",
            Source::Embedding => "embedding",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tsne,
    Pca,
}

/// A labelled 2-D point set with its silhouette in the projected plane.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionResult {
    pub coords: Matrix,
    pub source: Source,
    pub method: Method,
    pub separation: f64,
    /// Largest per-row entropy gap of the t-SNE affinities; 0 for PCA.
    pub entropy_gap: f64,
}

/// Eval-mode penultimate embeddings of encoded rows.
pub fn extract_embeddings(model: &TrainedModel, x: &Matrix) -> Result<Matrix> {
    model.network.penultimate(x)
}

pub fn project(points: &Matrix, labels: &[u8], source: Source, method: Method, tsne: &TsneParams) -> Result<ProjectionResult> {
    let (coords, entropy_gap) = match method {
        Method::Tsne => {
            let out = tsne_2d(points, tsne)?;
            let gap = out.affinities.max_gap();
            (out.coords, gap)
        }
        Method::Pca => (pca_2d(points)?.coords, 0.0),
    };
    let separation = separation_score(&coords, labels)?;
    Ok(ProjectionResult {
        coords,
        source,
        method,
        separation,
        entropy_gap,
    })
}

/// Silhouettes of one fold's test split in the model's embedding space and in
/// the standardized feature space the model was given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSeparation {
    pub seed: u64,
    pub fold: usize,
    pub embedding: f64,
    pub raw: f64,
}

/// Per-fold separation for results gathered with models kept.
pub fn fold_separation(results: &[FoldResult]) -> Result<Vec<FoldSeparation>> {
    results
        .iter()
        .map(|r| {
            let emb = r
                .test_embeddings
                .as_ref()
                .ok_or_else(|| Error::State("fold results carry no embeddings".into()))?;
            Ok(FoldSeparation {
                seed: r.record.seed,
                fold: r.record.fold,
                embedding: separation_score(emb, &r.test_labels)?,
                raw: separation_score(&r.test_features, &r.test_labels)?,
            })
        })
        .collect()
}

/// Test-split points of every fold, stacked: each sample appears once,
/// embedded by the model that never trained on it.
#[derive(Clone, Debug)]
pub struct PooledPoints {
    pub ids: Vec<usize>,
    pub labels: Vec<u8>,
    pub folds: Vec<usize>,
    pub raw: Matrix,
    pub embedding: Matrix,
}

pub fn pool_test_points<'a>(results: impl IntoIterator<Item = &'a FoldResult>) -> Result<PooledPoints> {
    let (mut ids, mut labels, mut folds, mut raw, mut emb) = (vec![], vec![], vec![], vec![], vec![]);
    let (mut raw_w, mut emb_w) = (0, 0);
    for r in results {
        let e = r
            .test_embeddings
            .as_ref()
            .ok_or_else(|| Error::State("fold results carry no embeddings".into()))?;
        ids.extend_from_slice(&r.test_indices);
        labels.extend_from_slice(&r.test_labels);
        folds.extend(std::iter::repeat_n(r.record.fold, r.test_indices.len()));
        raw.extend_from_slice(r.test_features.as_slice());
        emb.extend_from_slice(e.as_slice());
        raw_w = r.test_features.cols();
        emb_w = e.cols();
    }
    let n = ids.len();
    Ok(PooledPoints {
        ids,
        labels,
        folds,
        raw: Matrix::from_vec(n, raw_w, raw)?,
        embedding: Matrix::from_vec(n, emb_w, emb)?,
    })
}

/// Rows of `id,x,y,label,source,fold`.
pub fn projection_csv(rows: &[(&ProjectionResult, &[usize], &[u8], &[usize])]) -> String {
    let mut out = String::from("id,x,y,label,source,fold\n");
    for (proj, ids, labels, folds) in rows {
        for i in 0..proj.coords.rows() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                ids[i],
                proj.coords.get(i, 0),
                proj.coords.get(i, 1),
                labels[i],
                proj.source.name(),
                folds[i]
            );
        }
    }
    out
}

/// Static scatter plot: circles for label 0, squares for label 1.
pub fn scatter_svg(proj: &ProjectionResult, labels: &[u8], title: &str) -> String {
    let (w, h, pad) = (480.0, 480.0, 40.0);
    let n = proj.coords.rows();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        x0 = x0.min(proj.coords.get(i, 0));
        x1 = x1.max(proj.coords.get(i, 0));
        y0 = y0.min(proj.coords.get(i, 1));
        y1 = y1.max(proj.coords.get(i, 1));
    }
    let sx = (w - 2.0 * pad) / (x1 - x0).max(1e-12);
    let sy = (h - 2.0 * pad) / (y1 - y0).max(1e-12);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        w / 2.0,
        title.replace('&', "&amp;").replace('<', "&lt;")
    );
    for i in 0..n {
        let px = pad + (proj.coords.get(i, 0) - x0) * sx;
        let py = h - pad - (proj.coords.get(i, 1) - y0) * sy;
        if labels[i] == 1 {
            let _ = writeln!(
                out,
                r##"<rect x="{:.2}" y="{:.2}" width="6" height="6" fill="#d62728" fill-opacity="0.7"/>"##,
                px - 3.0,
                py - 3.0
            );
        } else {
            let _ = writeln!(out, r##"<circle cx="{px:.2}" cy="{py:.2}" r="3.2" fill="#1f77b4" fill-opacity="0.7"/>"##);
        }
    }
    let _ = writeln!(
        out,
        r##"<circle cx="{}" cy="{}" r="3.2" fill="#1f77b4"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">no disease</text>"##,
        pad,
        h - 14.0,
        pad + 8.0,
        h - 10.0
    );
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="6" height="6" fill="#d62728"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">disease</text>"##,
        pad + 97.0,
        h - 17.0,
        pad + 108.0,
        h - 10.0
    );
    out.push_str("</svg>\n");
    out
}
