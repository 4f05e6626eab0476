use std::path::Path;

use log::debug;
use ndarray::{Array2, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::objective::gradient_into;
use super::{similarity_matrix, total_loss, SimilarityMatrix};
use crate::data::{pca_project, stream_rng, InputMatrix};
use crate::error::{Error, Result};

/// How the optimizer's starting embedding is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// i.i.d. `N(0, 1e-4^2)` coordinates from the config seed.
    Random,
    /// First two principal components, rescaled to standard deviation 1e-4.
    Pca,
    /// Explicit `n x 2` starting points, used as is.
    Given(Vec<[f64; 2]>),
}

/// Optimizer settings. Defaults follow the standard exact t-SNE schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub max_iter: usize,
    pub learning_rate: f64,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub momentum_switch_iter: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub init: Init,
    pub seed: u64,
    /// Tolerance on the base-2 entropy during bandwidth calibration.
    pub entropy_tol: f64,
    /// Record the loss every this many iterations (0 disables the trace).
    pub trace_every: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            max_iter: 1000,
            learning_rate: 200.0,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch_iter: 250,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            init: Init::Random,
            seed: 42,
            entropy_tol: 1e-5,
            trace_every: 50,
        }
    }
}

impl TsneConfig {
    pub fn with_perplexity(perplexity: f64) -> Self {
        Self {
            perplexity,
            ..Self::default()
        }
    }

    /// Schedule for continuing from a converged embedding: no exaggeration,
    /// final momentum throughout.
    pub fn warm_continuation(&self, y0: &Array2<f64>, iters: usize) -> Self {
        Self {
            max_iter: iters,
            momentum_initial: self.momentum_final,
            momentum_switch_iter: 0,
            exaggeration: 1.0,
            exaggeration_iters: 0,
            init: Init::Given(y0.rows().into_iter().map(|r| [r[0], r[1]]).collect()),
            ..self.clone()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.perplexity > 1.0 && self.perplexity < n as f64) {
            return Err(Error::invalid(format!(
                "perplexity {} must lie strictly between 1 and n = {n}",
                self.perplexity
            )));
        }
        if !(self.learning_rate > 0.0) || !(self.exaggeration > 0.0) || !(self.entropy_tol > 0.0) {
            return Err(Error::invalid(
                "learning rate, exaggeration and entropy tolerance must be positive",
            ));
        }
        if let Init::Given(y) = &self.init {
            if y.len() != n {
                return Err(Error::invalid(format!(
                    "initial embedding has {} rows, expected {n}",
                    y.len()
                )));
            }
        }
        Ok(())
    }
}

/// An `n x 2` embedding with the settings and final loss that produced it.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub y: Array2<f64>,
    pub config: TsneConfig,
    pub loss: f64,
    /// `(iteration, loss)` pairs recorded during optimization.
    pub trace: Vec<(usize, f64)>,
}

impl Embedding {
    pub fn point(&self, i: usize) -> [f64; 2] {
        [self.y[[i, 0]], self.y[[i, 1]]]
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(
            path,
            &["y1", "y2"],
            self.y.rows().into_iter().map(|r| vec![r[0], r[1]]),
        )
    }

    pub fn save_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(
            path,
            &["iteration", "loss"],
            self.trace.iter().map(|&(it, l)| vec![it as f64, l]),
        )
    }
}

fn write_csv(
    path: impl AsRef<Path>,
    header: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

fn initial_embedding(x: Option<&InputMatrix>, n: usize, cfg: &TsneConfig) -> Result<Array2<f64>> {
    match &cfg.init {
        Init::Random => {
            let mut rng = stream_rng(cfg.seed, 0);
            let normal = Normal::new(0.0, 1e-4).expect("valid normal");
            Ok(Array2::from_shape_fn((n, 2), |_| normal.sample(&mut rng)))
        }
        Init::Pca => {
            let x = x.ok_or_else(|| {
                Error::invalid("PCA initialization needs the input matrix, not only similarities")
            })?;
            let p = pca_project(x, 2.min(x.ncols()))?;
            let mut y = Array2::zeros((n, 2));
            let proj = p.projected.values();
            for k in 0..proj.ncols() {
                y.column_mut(k).assign(&proj.column(k));
            }
            let sd = y.column(0).std(1.0);
            if sd > 0.0 {
                y *= 1e-4 / sd;
            }
            Ok(y)
        }
        Init::Given(rows) => {
            let y = Array2::from_shape_fn((n, 2), |(i, c)| rows[i][c]);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("initial embedding has non-finite values"));
            }
            Ok(y)
        }
    }
}

/// Embeds the rows of `x`.
pub fn run_tsne(x: &InputMatrix, cfg: &TsneConfig) -> Result<Embedding> {
    cfg.validate(x.nrows())?;
    let v = similarity_matrix(x, cfg.perplexity, cfg.entropy_tol)?;
    optimize(Some(x), &v, cfg)
}

/// Embeds precomputed similarities. PCA initialization is unavailable here.
pub fn run_tsne_with_similarity(v: &SimilarityMatrix, cfg: &TsneConfig) -> Result<Embedding> {
    if let Init::Given(y) = &cfg.init {
        if y.len() != v.n() {
            return Err(Error::invalid(
                "initial embedding size does not match similarities",
            ));
        }
    }
    optimize(None, v, cfg)
}

fn optimize(x: Option<&InputMatrix>, v: &SimilarityMatrix, cfg: &TsneConfig) -> Result<Embedding> {
    let n = v.n();
    let mut y = initial_embedding(x, n, cfg)?;
    let mut update = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));
    let mut grad = Array2::<f64>::zeros((n, 2));
    let mut trace = Vec::new();
    let mut last_finite = y.clone();

    for iter in 0..cfg.max_iter {
        let momentum = if iter < cfg.momentum_switch_iter {
            cfg.momentum_initial
        } else {
            cfg.momentum_final
        };
        let exaggeration = if iter < cfg.exaggeration_iters {
            cfg.exaggeration
        } else {
            1.0
        };
        let pts: Vec<[f64; 2]> = y.rows().into_iter().map(|r| [r[0], r[1]]).collect();
        gradient_into(&pts, v.values(), exaggeration, &mut grad);

        ndarray::Zip::from(&mut gains)
            .and(&grad)
            .and(&update)
            .for_each(|g, &d, &u| {
                *g = if (d > 0.0) != (u > 0.0) {
                    *g + 0.2
                } else {
                    *g * 0.8
                };
                if *g < 0.01 {
                    *g = 0.01;
                }
            });
        ndarray::Zip::from(&mut update)
            .and(&gains)
            .and(&grad)
            .for_each(|u, &g, &d| *u = momentum * *u - cfg.learning_rate * g * d);
        y += &update;
        let mean = y.mean_axis(Axis(0)).expect("n > 0");
        y -= &mean;

        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: iter,
                last_finite: Box::new(last_finite),
            });
        }
        last_finite.assign(&y);

        if cfg.trace_every > 0 && ((iter + 1) % cfg.trace_every == 0 || iter + 1 == cfg.max_iter) {
            let loss = total_loss(&y, v)?;
            debug!("iteration {}: loss {loss:.6}", iter + 1);
            trace.push((iter + 1, loss));
        }
    }
    let loss = total_loss(&y, v)?;
    if !loss.is_finite() {
        return Err(Error::Diverged {
            iteration: cfg.max_iter,
            last_finite: Box::new(y),
        });
    }
    Ok(Embedding {
        y,
        config: cfg.clone(),
        loss,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{presets, sample_gmm};

    #[test]
    fn config_json_round_trip() {
        let cfg = TsneConfig {
            init: Init::Given(vec![[1.0, 2.0]]),
            ..TsneConfig::with_perplexity(7.0)
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: TsneConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        let partial: TsneConfig =
            serde_json::from_str(r#"{"perplexity": 5, "init": "pca"}"#).unwrap();
        assert_eq!(partial.max_iter, 1000);
        assert_eq!(partial.init, Init::Pca);
    }

    #[test]
    fn deterministic() {
        let x = sample_gmm(&presets::two_gmm(4.0), 60, 1).unwrap();
        let cfg = TsneConfig {
            max_iter: 300,
            ..TsneConfig::with_perplexity(10.0)
        };
        let a = run_tsne(&x, &cfg).unwrap();
        let b = run_tsne(&x, &cfg).unwrap();
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn zero_iterations_keep_the_start() {
        let x = sample_gmm(&presets::two_gmm(4.0), 40, 2).unwrap();
        let base = run_tsne(
            &x,
            &TsneConfig {
                max_iter: 200,
                ..TsneConfig::with_perplexity(8.0)
            },
        )
        .unwrap();
        let again = run_tsne(&x, &base.config.warm_continuation(&base.y, 0)).unwrap();
        assert_eq!(again.y, base.y);
    }

    #[test]
    fn pca_init_has_tiny_spread() {
        let x = sample_gmm(&presets::two_gmm(4.0), 30, 3).unwrap();
        let cfg = TsneConfig {
            init: Init::Pca,
            max_iter: 0,
            ..TsneConfig::with_perplexity(5.0)
        };
        let e = run_tsne(&x, &cfg).unwrap();
        assert!((e.y.column(0).std(1.0) - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn pca_init_requires_inputs() {
        let x = sample_gmm(&presets::two_gmm(4.0), 30, 3).unwrap();
        let v = similarity_matrix(&x, 5.0, 1e-5).unwrap();
        let cfg = TsneConfig {
            init: Init::Pca,
            ..TsneConfig::with_perplexity(5.0)
        };
        assert!(run_tsne_with_similarity(&v, &cfg).is_err());
    }

    #[test]
    fn huge_learning_rate_diverges_with_state() {
        let x = sample_gmm(&presets::two_gmm(4.0), 30, 3).unwrap();
        let cfg = TsneConfig {
            learning_rate: 1e300,
            max_iter: 50,
            ..TsneConfig::with_perplexity(5.0)
        };
        match run_tsne(&x, &cfg) {
            Err(Error::Diverged { last_finite, .. }) => {
                assert!(last_finite.iter().all(|v| v.is_finite()))
            }
            other => panic!("expected divergence, got {:?}", other.map(|e| e.loss)),
        }
    }
}
