//! Per-point diagnostics: perturbation scores from the partial LOO-map,
//! singularity scores from loss Hessians, the density pre-screen and
//! perplexity selection by the elbow of the singularity curve.

mod dbscan;
mod hessian;
mod perturbation;
mod report;
mod select;
mod singularity;

pub use dbscan::{dbscan, k_distances, knee_value, Dbscan, PointKind, PrescreenConfig};
pub use hessian::{
    largevis_total_loss, singularity_hessian_largevis, singularity_hessian_tsne,
    singularity_hessian_umap, umap_total_loss, EdgeSet, Hessian2, TsneHessians,
};
pub use perturbation::{
    perturbation_score, perturbation_scores_batch, Approximation, PerturbationConfig,
    PerturbationScorer,
};
pub use report::{ScoreKind, ScoreReport};
pub use select::{elbow_index, select_perplexity, CurvePoint, PerplexitySelection, SelectConfig};
pub use singularity::{loss_hessians, singularity_scores, SingularityMethod};
