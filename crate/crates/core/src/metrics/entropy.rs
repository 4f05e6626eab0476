use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-9;

/// Shannon entropy (natural log) of a probability vector, `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::invalid("empty probability vector"));
    }
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid(
            "probabilities must be finite and non-negative",
        ));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::invalid(format!("probabilities sum to {s}, not 1")));
    }
    Ok(entropy_unchecked(p))
}

fn entropy_unchecked(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// One Gaussian per class, fitted by maximum likelihood to labelled rows.
#[derive(Debug, Clone, Serialize)]
pub struct FittedGmm {
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
    /// Classes whose covariance needed `delta I` added.
    pub regularized: Vec<bool>,
    #[serde(skip)]
    factors: Vec<Option<Cholesky<f64, Dyn>>>,
}

fn class_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

impl FittedGmm {
    /// Fits class `j` to the rows labelled `j`; every label in `0..k` must occur.
    pub fn fit(x: &Array2<f64>, labels: &[usize]) -> Result<Self> {
        let (n, d) = x.dim();
        if labels.len() != n {
            return Err(Error::invalid(format!(
                "{} labels for {n} rows",
                labels.len()
            )));
        }
        let k = class_count(labels);
        if k < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        let mut means = Vec::with_capacity(k);
        let mut covariances = Vec::with_capacity(k);
        let mut regularized = Vec::with_capacity(k);
        let mut factors = Vec::with_capacity(k);
        for j in 0..k {
            let rows: Vec<usize> = (0..n).filter(|&i| labels[i] == j).collect();
            if rows.is_empty() {
                return Err(Error::invalid(format!("class {j} has no members")));
            }
            let m = rows.len() as f64;
            let mean: Vec<f64> = (0..d)
                .map(|c| rows.iter().map(|&i| x[[i, c]]).sum::<f64>() / m)
                .collect();
            let mut cov = DMatrix::<f64>::zeros(d, d);
            for &i in &rows {
                let r = DVector::from_fn(d, |c, _| x[[i, c]] - mean[c]);
                cov += &r * r.transpose();
            }
            cov /= m;
            let mut reg = rows.len() < d + 1;
            let mut chol = if reg {
                None
            } else {
                Cholesky::new(cov.clone())
            };
            if chol.is_none() {
                reg = true;
                let delta = 1e-6 * cov.trace() / d as f64;
                if !(delta > 0.0) {
                    return Err(Error::Singular(format!("covariance of class {j} is zero")));
                }
                for c in 0..d {
                    cov[(c, c)] += delta;
                }
                chol = Cholesky::new(cov.clone());
                if chol.is_none() {
                    return Err(Error::Singular(format!(
                        "covariance of class {j} stays singular after regularization"
                    )));
                }
            }
            means.push(mean);
            covariances.push(
                (0..d)
                    .map(|r| (0..d).map(|c| cov[(r, c)]).collect())
                    .collect(),
            );
            regularized.push(reg);
            factors.push(chol);
        }
        Ok(Self {
            means,
            covariances,
            regularized,
            factors,
        })
    }

    pub fn classes(&self) -> usize {
        self.means.len()
    }

    /// Class posteriors under a uniform prior.
    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = self
            .means
            .iter()
            .zip(&self.factors)
            .map(|(mean, f)| {
                let f = f.as_ref().expect("factor computed at fit time");
                let r = DVector::from_fn(mean.len(), |c, _| x[c] - mean[c]);
                let z = f
                    .l()
                    .solve_lower_triangular(&r)
                    .expect("non-singular factor");
                let log_det: f64 = f.l().diagonal().iter().map(|v| v.ln()).sum();
                -0.5 * z.norm_squared() - log_det
            })
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    }

    /// Posterior entropy of every row of `x`.
    pub fn entropies(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|r| entropy_unchecked(&self.posterior(&r.to_vec())))
            .collect()
    }
}

/// Per-point entropy difference `E(p) - E(q)` between class posteriors fitted
/// in the input space (`p`) and the embedding (`q`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyDifference {
    pub input_entropy: Vec<f64>,
    pub embedding_entropy: Vec<f64>,
    pub difference: Vec<f64>,
    /// Per class, whether either fit was regularized.
    pub regularized: Vec<bool>,
}

pub fn entropy_difference(
    x: &Array2<f64>,
    y: &Array2<f64>,
    labels: &[usize],
) -> Result<EntropyDifference> {
    if x.nrows() != y.nrows() {
        return Err(Error::invalid("input and embedding row counts differ"));
    }
    let gx = FittedGmm::fit(x, labels)?;
    let gy = FittedGmm::fit(y, labels)?;
    let input_entropy = gx.entropies(x);
    let embedding_entropy = gy.entropies(y);
    let difference = input_entropy
        .iter()
        .zip(&embedding_entropy)
        .map(|(p, q)| p - q)
        .collect();
    let regularized = gx
        .regularized
        .iter()
        .zip(&gy.regularized)
        .map(|(a, b)| *a || *b)
        .collect();
    Ok(EntropyDifference {
        input_entropy,
        embedding_entropy,
        difference,
        regularized,
    })
}
