use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dbscan::PrescreenConfig;
use super::report::{ScoreKind, ScoreReport};
use crate::data::{diameter, pca_project, InputMatrix, PcaProjection};
use crate::error::{Error, Result};
use crate::loo::{solve_loo_map, ColumnMethod, LooContext, LooProblem, SolveStrategy};
use crate::tsne::{similarity_matrix, SimilarityMatrix};

/// How the similarities of a perturbed point are recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approximation {
    /// Redo the preprocessing PCA (if any) and recalibrate every bandwidth.
    #[default]
    Exact,
    /// Reuse the original PCA projection, recalibrate every bandwidth.
    Approx1,
    /// Reuse the PCA projection and all other bandwidths; calibrate only the
    /// perturbed row.
    Approx2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationConfig {
    /// Perturbation length in input units; 10% of the data diameter if unset.
    pub lambda: Option<f64>,
    /// Number of leading principal directions searched (with negations).
    pub directions: usize,
    pub approximation: Approximation,
    /// PCA dimension applied to the inputs before computing similarities.
    pub preprocess_dim: Option<usize>,
    /// Score only border and noise points of a density clustering of the
    /// embedding.
    pub prescreen: Option<PrescreenConfig>,
    /// Entropy tolerance (bits) for bandwidth calibration.
    pub entropy_tol: f64,
    pub strategy: SolveStrategy,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            directions: 3,
            approximation: Approximation::Exact,
            preprocess_dim: None,
            prescreen: None,
            entropy_tol: 1e-5,
            strategy: SolveStrategy {
                grid: 0,
                max_point_starts: Some(16),
                ..SolveStrategy::default()
            },
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::invalid(format!("lambda must be positive, got {l}")));
            }
        }
        if self.directions == 0 {
            return Err(Error::invalid("at least one direction is required"));
        }
        if self.preprocess_dim == Some(0) {
            return Err(Error::invalid("preprocess dimension must be positive"));
        }
        if !(self.entropy_tol > 0.0) {
            return Err(Error::invalid("entropy tolerance must be positive"));
        }
        Ok(())
    }
}

/// Precomputed state for perturbation scores against one embedding.
///
/// `v` must be the calibrated similarities of `x` (of its PCA projection when
/// `preprocess_dim` is set).
#[derive(Debug)]
pub struct PerturbationScorer<'a> {
    x: &'a InputMatrix,
    y: &'a Array2<f64>,
    cfg: PerturbationConfig,
    lambda: f64,
    directions: Array2<f64>,
    projection: Option<PcaProjection>,
    ctx: LooContext,
}

impl<'a> PerturbationScorer<'a> {
    pub fn new(
        x: &'a InputMatrix,
        y: &'a Array2<f64>,
        v: &SimilarityMatrix,
        cfg: &PerturbationConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let projection = cfg.preprocess_dim.map(|m| pca_project(x, m)).transpose()?;
        let space = projection.as_ref().map_or(x, |p| &p.projected);
        let ctx = LooContext::new(space, y, v, cfg.entropy_tol)?;
        let k = cfg.directions.min(x.nrows()).min(x.ncols());
        let directions = pca_project(x, k)?.directions;
        let lambda = match cfg.lambda {
            Some(l) => l,
            None => {
                let d = diameter(x.values());
                if d == 0.0 {
                    return Err(Error::invalid("all input points coincide"));
                }
                0.1 * d
            }
        };
        Ok(Self {
            x,
            y,
            cfg: cfg.clone(),
            lambda,
            directions,
            projection,
            ctx,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Unit perturbation directions as rows.
    pub fn directions(&self) -> &Array2<f64> {
        &self.directions
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Partial LOO problem for point `i` moved to `x_new` (input units).
    pub fn problem(&self, i: usize, x_new: &[f64]) -> Result<LooProblem> {
        let projected = |p: &PcaProjection| p.project(Array1::from(x_new.to_vec()).view()).to_vec();
        match (self.cfg.approximation, &self.projection) {
            (Approximation::Exact, Some(p)) => {
                let m = p.directions.nrows();
                let changed = self.x.with_row_replaced(i, x_new)?;
                let proj = pca_project(&changed, m)?;
                let v = similarity_matrix(
                    &proj.projected,
                    self.ctx.perplexity(),
                    self.cfg.entropy_tol,
                )?;
                let u = (0..self.n())
                    .filter(|&k| k != i)
                    .map(|k| v.values()[[k, i]])
                    .collect();
                LooProblem::from_embedding(self.y, Some(i), u)
            }
            (Approximation::Exact | Approximation::Approx1, p) => {
                let x = p.as_ref().map_or_else(|| x_new.to_vec(), projected);
                self.ctx.partial_problem(i, &x, ColumnMethod::Exact)
            }
            (Approximation::Approx2, p) => {
                let x = p.as_ref().map_or_else(|| x_new.to_vec(), projected);
                self.ctx.partial_problem(i, &x, ColumnMethod::Approx2)
            }
        }
    }

    /// Largest displacement of the partial LOO-map of point `i` over the
    /// perturbations `x_i +- lambda e_j`.
    pub fn score(&self, i: usize) -> Result<f64> {
        if i >= self.n() {
            return Err(Error::invalid(format!(
                "index {i} out of range for {} points",
                self.n()
            )));
        }
        let yi = self.ctx.embedding_point(i);
        let strategy = self.cfg.strategy.clone().with_extra_start(yi);
        let xi = self.x.row(i);
        let mut best = 0.0f64;
        for (j, e) in self.directions.rows().into_iter().enumerate() {
            for sign in [1.0, -1.0] {
                let x_new: Vec<f64> = xi
                    .iter()
                    .zip(e.iter())
                    .map(|(a, b)| a + sign * self.lambda * b)
                    .collect();
                let label = || format!("{}e{}", if sign > 0.0 { '+' } else { '-' }, j + 1);
                let sol = self
                    .problem(i, &x_new)
                    .and_then(|p| solve_loo_map(&p, &strategy))
                    .map_err(|source| Error::Direction {
                        direction: label(),
                        source: Box::new(source),
                    })?;
                best = best.max((sol.argmin[0] - yi[0]).hypot(sol.argmin[1] - yi[1]));
            }
        }
        Ok(best)
    }

    /// Points selected by the pre-screen (all points when it is disabled).
    pub fn selection(&self) -> Result<Vec<bool>> {
        match &self.cfg.prescreen {
            Some(p) => Ok(p.run(self.y)?.periphery()),
            None => Ok(vec![true; self.n()]),
        }
    }

    /// Scores for the selected points; the rest are masked. Failures are
    /// recorded per point.
    pub fn scores_for(&self, selected: &[bool]) -> Result<ScoreReport> {
        if selected.len() != self.n() {
            return Err(Error::invalid(
                "selection mask length differs from the data",
            ));
        }
        let mut cfg = serde_json::to_value(&self.cfg)?;
        cfg["lambda"] = serde_json::json!(self.lambda);
        let mut report = ScoreReport::new(ScoreKind::Perturbation, self.n(), cfg);
        let results: Vec<Option<Result<f64>>> = (0..self.n())
            .into_par_iter()
            .map(|i| selected[i].then(|| self.score(i)))
            .collect();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                None => report.masked[i] = true,
                Some(Ok(s)) => report.scores[i] = s,
                Some(Err(e)) => {
                    report.flagged[i] = true;
                    report.errors[i] = Some(e.to_string());
                }
            }
        }
        Ok(report)
    }

    pub fn scores(&self) -> Result<ScoreReport> {
        self.scores_for(&self.selection()?)
    }
}

/// Perturbation score of a single point.
pub fn perturbation_score(
    x: &InputMatrix,
    y: &Array2<f64>,
    v: &SimilarityMatrix,
    i: usize,
    cfg: &PerturbationConfig,
) -> Result<f64> {
    PerturbationScorer::new(x, y, v, cfg)?.score(i)
}

/// Perturbation scores of all points (or the pre-screened periphery).
pub fn perturbation_scores_batch(
    x: &InputMatrix,
    y: &Array2<f64>,
    v: &SimilarityMatrix,
    cfg: &PerturbationConfig,
) -> Result<ScoreReport> {
    PerturbationScorer::new(x, y, v, cfg)?.scores()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{presets, sample_gmm};
    use crate::tsne::{run_tsne_with_similarity, TsneConfig};

    fn setup() -> (InputMatrix, SimilarityMatrix, Array2<f64>) {
        let x = sample_gmm(&presets::two_gmm(6.0), 50, 2).unwrap();
        let v = similarity_matrix(&x, 10.0, 1e-5).unwrap();
        let y = run_tsne_with_similarity(&v, &TsneConfig::with_perplexity(10.0))
            .unwrap()
            .y;
        (x, v, y)
    }

    #[test]
    fn config_validation() {
        let bad = PerturbationConfig {
            lambda: Some(0.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PerturbationConfig {
            directions: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        PerturbationConfig::default().validate().unwrap();
    }

    #[test]
    fn default_lambda_is_a_tenth_of_the_diameter() {
        let (x, v, y) = setup();
        let s = PerturbationScorer::new(&x, &y, &v, &PerturbationConfig::default()).unwrap();
        assert!((s.lambda() - 0.1 * diameter(x.values())).abs() < 1e-12);
        assert_eq!(s.directions().nrows(), 2);
    }

    #[test]
    fn exact_and_approx1_agree_without_preprocessing() {
        let (x, v, y) = setup();
        let a = perturbation_score(&x, &y, &v, 4, &PerturbationConfig::default()).unwrap();
        let cfg = PerturbationConfig {
            approximation: Approximation::Approx1,
            ..Default::default()
        };
        let b = perturbation_score(&x, &y, &v, 4, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn masked_points_are_not_scored() {
        let (x, v, y) = setup();
        let s = PerturbationScorer::new(&x, &y, &v, &PerturbationConfig::default()).unwrap();
        let mut sel = vec![false; 50];
        sel[7] = true;
        let r = s.scores_for(&sel).unwrap();
        assert!(r.scores[7].is_finite());
        assert_eq!(r.masked.iter().filter(|m| **m).count(), 49);
        assert!(r.scores[0].is_nan());
    }
}
