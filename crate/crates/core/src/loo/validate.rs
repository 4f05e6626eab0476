use log::info;
use ndarray::{s, Array2};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::data::{
    pairwise_sq_distances, sample_gmm, sample_swiss_roll, sq_dist, stream_rng, GmmSpec,
    InputMatrix, StreamRng, SwissRollSpec,
};
use crate::error::{Error, Result};
use crate::tsne::{
    run_tsne_with_similarity, similarity_from_distances_guided, similarity_matrix, Embedding,
    TsneConfig,
};

/// Source of the extra input point added in each validation trial.
pub trait PointSampler: Sync {
    fn sample(&self, rng: &mut StreamRng) -> Result<Vec<f64>>;
}

impl PointSampler for GmmSpec {
    fn sample(&self, rng: &mut StreamRng) -> Result<Vec<f64>> {
        Ok(sample_gmm(self, 1, rng.next_u64())?.row(0).to_vec())
    }
}

impl PointSampler for SwissRollSpec {
    fn sample(&self, rng: &mut StreamRng) -> Result<Vec<f64>> {
        let spec = SwissRollSpec {
            n: 1,
            seed: rng.next_u64(),
            ..self.clone()
        };
        Ok(sample_swiss_roll(&spec)?.row(0).to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidateOptions {
    pub trials: usize,
    /// Iterations of the warm-started second run.
    pub second_iters: usize,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            trials: 20,
            second_iters: 250,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LooValidationReport {
    pub n: usize,
    pub perplexity: f64,
    pub errors: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl LooValidationReport {
    fn from_errors(n: usize, perplexity: f64, errors: Vec<f64>) -> Self {
        let k = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / k;
        let std = if errors.len() > 1 {
            (errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            n,
            perplexity,
            errors,
            mean,
            std,
        }
    }
}

/// Relative Frobenius distance `|Y - Y'|_F / |Y|_F`.
pub fn normalized_error(y: &Array2<f64>, y_new: &Array2<f64>) -> f64 {
    let num: f64 = y.iter().zip(y_new).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = y.iter().map(|a| a * a).sum();
    (num / den).sqrt()
}

/// One trial: append `x_new`, re-embed starting from `base` (the new point
/// starts at the embedding of its nearest input neighbour) and measure how
/// far the original points moved.
pub fn loo_trial(
    x: &InputMatrix,
    base: &Embedding,
    x_new: &[f64],
    second_iters: usize,
) -> Result<f64> {
    let guesses = base_betas(x, &base.config)?;
    trial_with_guesses(x, base, x_new, second_iters, &guesses)
}

fn base_betas(x: &InputMatrix, cfg: &TsneConfig) -> Result<Vec<f64>> {
    let v = similarity_matrix(x, cfg.perplexity, cfg.entropy_tol)?;
    Ok(v.bandwidths()
        .map(|b| b.iter().map(|r| r.beta).collect())
        .unwrap_or_default())
}

/// Embeds `x` once, then runs `opts.trials` add-one trials with points drawn
/// from `sampler` (trial `t` uses RNG stream `t` of `opts.seed`).
pub fn validate_loo(
    x: &InputMatrix,
    config: &TsneConfig,
    sampler: &dyn PointSampler,
    opts: &ValidateOptions,
) -> Result<LooValidationReport> {
    if opts.trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    config.validate(x.nrows())?;
    let v = similarity_matrix(x, config.perplexity, config.entropy_tol)?;
    let base = run_tsne_with_similarity(&v, config)?;
    validate_from_base(x, &base, sampler, opts)
}

/// As [`validate_loo`] with a precomputed base embedding of `x`.
pub fn validate_from_base(
    x: &InputMatrix,
    base: &Embedding,
    sampler: &dyn PointSampler,
    opts: &ValidateOptions,
) -> Result<LooValidationReport> {
    let guesses = base_betas(x, &base.config)?;
    let mut errors = Vec::with_capacity(opts.trials);
    for t in 0..opts.trials {
        let mut rng = stream_rng(opts.seed, t as u64);
        let x_new = sampler.sample(&mut rng)?;
        let err = trial_with_guesses(x, base, &x_new, opts.second_iters, &guesses)?;
        info!("trial {t}: eps = {err:.5}");
        errors.push(err);
    }
    Ok(LooValidationReport::from_errors(
        x.nrows(),
        base.config.perplexity,
        errors,
    ))
}

fn trial_with_guesses(
    x: &InputMatrix,
    base: &Embedding,
    x_new: &[f64],
    second_iters: usize,
    guesses: &[f64],
) -> Result<f64> {
    let n = x.nrows();
    let nearest = (0..n)
        .min_by(|&a, &b| {
            let da = sq_dist(x.row(a).as_slice().expect("standard layout"), x_new);
            let db = sq_dist(x.row(b).as_slice().expect("standard layout"), x_new);
            da.total_cmp(&db)
        })
        .expect("n > 0");
    let augmented = x.with_row_appended(x_new)?;
    let mut y0 = base.y.clone();
    y0.push_row(base.y.row(nearest))
        .map_err(|e| Error::invalid(e.to_string()))?;
    let cfg = &base.config;
    let v = similarity_from_distances_guided(
        pairwise_sq_distances(augmented.values()),
        cfg.perplexity,
        cfg.entropy_tol,
        Some(guesses),
    )?;
    let second = run_tsne_with_similarity(&v, &cfg.warm_continuation(&y0, second_iters))?;
    Ok(normalized_error(
        &base.y,
        &second.y.slice(s![..n, ..]).to_owned(),
    ))
}
