use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hessian::{
    singularity_hessian_largevis, singularity_hessian_umap, EdgeSet, Hessian2, TsneHessians,
};
use super::report::{ScoreKind, ScoreReport};
use crate::error::Result;
use crate::tsne::SimilarityMatrix;

/// Loss whose Hessian defines the singularity score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum SingularityMethod {
    Tsne,
    Umap { a: f64, b: f64 },
    LargeVis { edges: EdgeSet, gamma: f64 },
}

/// Per-point Hessians of the loss that the embedding minimizes. For LargeVis
/// that is the negated objective.
pub fn loss_hessians(
    y: &Array2<f64>,
    v: &SimilarityMatrix,
    method: &SingularityMethod,
) -> Result<Vec<Result<Hessian2>>> {
    let n = y.nrows();
    Ok(match method {
        SingularityMethod::Tsne => {
            let ctx = TsneHessians::new(y, v)?;
            (0..n).into_par_iter().map(|i| ctx.hessian(i)).collect()
        }
        SingularityMethod::Umap { a, b } => (0..n)
            .into_par_iter()
            .map(|i| singularity_hessian_umap(y, v, i, *a, *b))
            .collect(),
        SingularityMethod::LargeVis { edges, gamma } => (0..n)
            .into_par_iter()
            .map(|i| {
                singularity_hessian_largevis(y, v, edges, *gamma, i)
                    .map(|h| Hessian2::new(h.matrix.scale(-1.0)))
            })
            .collect(),
    })
}

/// `1 / lambda_min(H_i)` for every point; non-positive curvature gives `+inf`
/// with the point flagged.
pub fn singularity_scores(
    y: &Array2<f64>,
    v: &SimilarityMatrix,
    method: &SingularityMethod,
) -> Result<ScoreReport> {
    let hessians = loss_hessians(y, v, method)?;
    let config = serde_json::to_value(method)?;
    let mut report = ScoreReport::new(ScoreKind::Singularity, y.nrows(), config);
    for (i, h) in hessians.into_iter().enumerate() {
        match h {
            Ok(h) => match h.singularity_score() {
                Some(s) => report.scores[i] = s,
                None => {
                    report.scores[i] = f64::INFINITY;
                    report.flagged[i] = true;
                }
            },
            Err(e) => report.errors[i] = Some(e.to_string()),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{presets, sample_gmm};
    use crate::tsne::{run_tsne, TsneConfig};

    #[test]
    fn embedded_points_have_finite_positive_scores() {
        let x = sample_gmm(&presets::two_gmm(6.0), 60, 3).unwrap();
        let cfg = TsneConfig {
            max_iter: 400,
            ..TsneConfig::with_perplexity(10.0)
        };
        let e = run_tsne(&x, &cfg).unwrap();
        let v = crate::tsne::similarity_matrix(&x, 10.0, cfg.entropy_tol).unwrap();
        let r = singularity_scores(&e.y, &v, &SingularityMethod::Tsne).unwrap();
        assert_eq!(r.len(), 60);
        let finite = r.finite_indices().len();
        assert!(finite >= 55, "{finite}");
        assert!(r.scores.iter().filter(|s| s.is_finite()).all(|&s| s > 0.0));
        assert!(r.errors.iter().all(Option::is_none));
    }

    #[test]
    fn method_serializes_with_tag() {
        let m = SingularityMethod::Umap { a: 1.5, b: 0.9 };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"method":"umap","a":1.5,"b":0.9}"#);
        let back: SingularityMethod = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
