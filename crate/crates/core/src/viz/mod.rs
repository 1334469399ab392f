//! Low-dimensional projections of vector sets for inspection.

mod eigen;
mod export;
mod pca;
mod silhouette;
mod tsne;

use std::sync::Arc;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use export::{export_scatter, parse_scatter_tsv, scatter_svg, scatter_tsv, ScatterRow};
pub use pca::{pca_project, Pca};
pub use silhouette::silhouette_score;
pub use tsne::{default_perplexity, joint_affinities, kl_divergence, tsne_project, Tsne, TsneConfig};

use crate::error::{ensure_len, Result};
use crate::registry::Registry;

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub method: String,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    /// Named scalars: explained-variance ratios for PCA, KL values for t-SNE.
    pub diagnostics: Vec<(String, f64)>,
    pub seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ProjectionOptions {
    /// t-SNE only; `None` uses the default for the point count.
    pub perplexity: Option<f64>,
    pub seed: u64,
}

pub trait Projection: Send + Sync {
    fn name(&self) -> &'static str;
    /// Projects to two dimensions.
    fn project(&self, vectors: &[Vec<f64>], labels: &[String], options: &ProjectionOptions) -> Result<ProjectionResult>;
}

pub struct PcaProjection;

impl Projection for PcaProjection {
    fn name(&self) -> &'static str {
        "pca"
    }

    fn project(&self, vectors: &[Vec<f64>], labels: &[String], options: &ProjectionOptions) -> Result<ProjectionResult> {
        ensure_len("projection labels", vectors.len(), labels.len())?;
        let pca = pca_project(vectors, 2)?;
        let diagnostics = pca
            .explained_variance_ratio
            .iter()
            .enumerate()
            .map(|(i, r)| (format!("explained_variance_ratio_{}", i + 1), *r))
            .collect();
        Ok(ProjectionResult {
            method: self.name().into(),
            points: pca.coordinates,
            labels: labels.to_vec(),
            diagnostics,
            seed: options.seed,
        })
    }
}

pub struct TsneProjection;

impl Projection for TsneProjection {
    fn name(&self) -> &'static str {
        "tsne"
    }

    fn project(&self, vectors: &[Vec<f64>], labels: &[String], options: &ProjectionOptions) -> Result<ProjectionResult> {
        ensure_len("projection labels", vectors.len(), labels.len())?;
        let cfg = TsneConfig {
            perplexity: options.perplexity,
            ..TsneConfig::default()
        };
        let t = tsne_project(vectors, &cfg, options.seed)?;
        Ok(ProjectionResult {
            method: self.name().into(),
            points: t.points.iter().map(|p| p.to_vec()).collect(),
            labels: labels.to_vec(),
            diagnostics: vec![
                ("perplexity".into(), t.perplexity),
                ("initial_kl".into(), t.initial_kl),
                ("final_kl".into(), t.final_kl),
            ],
            seed: options.seed,
        })
    }
}

pub fn projection_registry() -> Registry<dyn Projection> {
    let mut reg: Registry<dyn Projection> = Registry::new("projection");
    reg.register("pca", Arc::new(PcaProjection));
    reg.register("tsne", Arc::new(TsneProjection));
    reg
}
