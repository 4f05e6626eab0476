use std::path::Path;

use log::warn;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::singularity::{singularity_scores, SingularityMethod};
use crate::data::{stream_rng, InputMatrix};
use crate::error::{Error, Result};
use crate::tsne::{run_tsne_with_similarity, similarity_matrix, Embedding, TsneConfig};

/// Index of the elbow of a decreasing curve: the interior point with the
/// largest second difference `c[j-1] - 2 c[j] + c[j+1]`, i.e. the vertex of
/// the sharpest bend. Curves are compared on a log scale when `log_scale`.
pub fn elbow_index(curve: &[f64], log_scale: bool) -> Result<usize> {
    if curve.len() < 3 {
        return Err(Error::TooFewCandidates(format!(
            "{} curve points, need 3",
            curve.len()
        )));
    }
    let c: Vec<f64> = if log_scale {
        if curve.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("log-scaled curve needs positive values"));
        }
        curve.iter().map(|v| v.ln()).collect()
    } else {
        curve.to_vec()
    };
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("curve has non-finite values"));
    }
    Ok((1..c.len() - 1)
        .max_by(|&a, &b| {
            let d = |j: usize| c[j - 1] - 2.0 * c[j] + c[j + 1];
            d(a).total_cmp(&d(b)).then(b.cmp(&a))
        })
        .expect("interior points exist"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectConfig {
    /// Embedding settings; `perplexity` is replaced by each candidate and
    /// `seed` by a per-candidate stream.
    pub tsne: TsneConfig,
    /// Fraction of the largest finite singularity scores averaged per candidate.
    pub top_fraction: f64,
    pub log_scale: bool,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            tsne: TsneConfig::default(),
            top_fraction: 0.05,
            log_scale: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub perplexity: f64,
    pub top_mean: f64,
    /// Points with non-positive curvature, left out of `top_mean`.
    pub infinite: usize,
}

#[derive(Debug, Clone)]
pub struct PerplexitySelection {
    pub curve: Vec<CurvePoint>,
    pub chosen_index: usize,
    pub chosen: f64,
    /// Embeddings of the successful candidates, aligned with `curve`.
    pub embeddings: Vec<Embedding>,
}

impl PerplexitySelection {
    /// CSV with columns `perplexity, top5_mean, chosen`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["perplexity", "top5_mean", "chosen"])?;
        for (j, p) in self.curve.iter().enumerate() {
            w.write_record([
                format!("{:?}", p.perplexity),
                format!("{:?}", p.top_mean),
                u8::from(j == self.chosen_index).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Embeds at each candidate perplexity, summarizes the singularity scores by
/// their top-fraction mean and picks the elbow of that curve.
pub fn select_perplexity(
    x: &InputMatrix,
    candidates: &[f64],
    cfg: &SelectConfig,
) -> Result<PerplexitySelection> {
    if candidates.len() < 3 {
        return Err(Error::TooFewCandidates(format!(
            "{} candidates given, need 3",
            candidates.len()
        )));
    }
    if candidates.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid(
            "candidate perplexities must be strictly ascending",
        ));
    }
    let runs: Vec<Option<(CurvePoint, Embedding)>> = candidates
        .par_iter()
        .enumerate()
        .map(|(j, &p)| {
            let seed = stream_rng(cfg.tsne.seed, j as u64).next_u64();
            let tsne = TsneConfig {
                perplexity: p,
                seed,
                ..cfg.tsne.clone()
            };
            let run = || -> Result<(CurvePoint, Embedding)> {
                let v = similarity_matrix(x, p, tsne.entropy_tol)?;
                let e = run_tsne_with_similarity(&v, &tsne)?;
                let r = singularity_scores(&e.y, &v, &SingularityMethod::Tsne)?;
                let top_mean = r
                    .top_fraction_mean(cfg.top_fraction)
                    .ok_or_else(|| Error::invalid("no finite singularity score"))?;
                Ok((
                    CurvePoint {
                        perplexity: p,
                        top_mean,
                        infinite: r.infinite_count(),
                    },
                    e,
                ))
            };
            match run() {
                Ok(r) => Some(r),
                Err(e) => {
                    warn!("perplexity {p} skipped: {e}");
                    None
                }
            }
        })
        .collect();
    let (curve, embeddings): (Vec<_>, Vec<_>) = runs.into_iter().flatten().unzip();
    if curve.len() < 3 {
        return Err(Error::TooFewCandidates(format!(
            "only {} of {} candidates succeeded",
            curve.len(),
            candidates.len()
        )));
    }
    let values: Vec<f64> = curve.iter().map(|c: &CurvePoint| c.top_mean).collect();
    let chosen_index = elbow_index(&values, cfg.log_scale)?;
    Ok(PerplexitySelection {
        chosen: curve[chosen_index].perplexity,
        chosen_index,
        curve,
        embeddings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinked_curve() {
        // steep until index 3, flat afterwards
        let c = [100.0, 40.0, 16.0, 6.4, 6.0, 5.7, 5.5];
        assert_eq!(elbow_index(&c, true).unwrap(), 3);
        assert_eq!(elbow_index(&c, false).unwrap(), 1);
    }

    #[test]
    fn too_short_or_invalid() {
        assert!(elbow_index(&[1.0, 0.5], true).is_err());
        assert!(elbow_index(&[1.0, 0.0, -1.0], true).is_err());
        assert_eq!(elbow_index(&[1.0, 0.0, -1.0], false).unwrap(), 1);
    }

    #[test]
    fn candidates_must_ascend() {
        let x = InputMatrix::new(ndarray::Array2::zeros((5, 2))).unwrap();
        let cfg = SelectConfig::default();
        assert!(select_perplexity(&x, &[2.0, 3.0], &cfg).is_err());
        assert!(select_perplexity(&x, &[2.0, 2.0, 3.0], &cfg).is_err());
    }
}
