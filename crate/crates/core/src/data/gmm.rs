use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{stream_rng, InputMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub weight: f64,
}

/// A Gaussian mixture, in the JSON layout
/// `{"components":[{"mean":[..],"cov":[[..]],"weight":w}], "seed":s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub components: Vec<GmmComponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GmmSpec {
    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    /// Checks weights and shapes, and returns a square-root factor `L` with
    /// `L L^T = cov` for every component.
    fn factors(&self) -> Result<Vec<DMatrix<f64>>> {
        if self.components.is_empty() {
            return Err(Error::invalid("mixture has no components"));
        }
        let d = self.dim();
        if d == 0 {
            return Err(Error::invalid("component means must be non-empty"));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        self.components
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if !(c.weight > 0.0) {
                    return Err(Error::invalid(format!(
                        "component {j} has non-positive weight {}",
                        c.weight
                    )));
                }
                if c.mean.len() != d || c.mean.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!(
                        "component {j}: mean must have {d} finite entries"
                    )));
                }
                if c.cov.len() != d || c.cov.iter().any(|r| r.len() != d) {
                    return Err(Error::invalid(format!(
                        "component {j}: covariance must be {d}x{d}"
                    )));
                }
                let cov = DMatrix::from_fn(d, d, |r, s| c.cov[r][s]);
                let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
                for r in 0..d {
                    for s in 0..r {
                        if (cov[(r, s)] - cov[(s, r)]).abs() > 1e-12 * scale {
                            return Err(Error::invalid(format!(
                                "component {j}: covariance is not symmetric"
                            )));
                        }
                    }
                }
                let eig = SymmetricEigen::new(cov);
                let min = eig.eigenvalues.min();
                if min < -1e-10 * scale {
                    return Err(Error::NotPsd {
                        component: j,
                        min_eigenvalue: min,
                    });
                }
                let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
                Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
            })
            .collect()
    }
}

/// Draws `n` labelled points from the mixture.
///
/// Component assignments come from stream 0 of the seed; the Gaussian noise
/// for component `j` comes from stream `1 + j`, consumed in row order.
pub fn sample_gmm(spec: &GmmSpec, n: usize, seed: u64) -> Result<InputMatrix> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    let factors = spec.factors()?;
    let d = spec.dim();
    let k = spec.components.len();

    let mut cumulative = Vec::with_capacity(k);
    let mut acc = 0.0;
    for c in &spec.components {
        acc += c.weight;
        cumulative.push(acc);
    }

    let mut assign_rng = stream_rng(seed, 0);
    let labels: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = assign_rng.random::<f64>() * acc;
            cumulative.iter().position(|&c| u < c).unwrap_or(k - 1)
        })
        .collect();

    let mut noise_rngs: Vec<_> = (0..k).map(|j| stream_rng(seed, 1 + j as u64)).collect();
    let mut values = Array2::zeros((n, d));
    let mut z = vec![0.0; d];
    for (i, &j) in labels.iter().enumerate() {
        let rng = &mut noise_rngs[j];
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
        let comp = &spec.components[j];
        let l = &factors[j];
        for r in 0..d {
            let mut v = comp.mean[r];
            for s in 0..d {
                v += l[(r, s)] * z[s];
            }
            values[[i, r]] = v;
        }
    }
    InputMatrix::new(values)?.with_labels(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso(mean: Vec<f64>, var: f64, weight: f64) -> GmmComponent {
        let d = mean.len();
        let cov = (0..d)
            .map(|r| (0..d).map(|s| if r == s { var } else { 0.0 }).collect())
            .collect();
        GmmComponent { mean, cov, weight }
    }

    #[test]
    fn point_mass_gives_identical_rows() {
        let spec = GmmSpec {
            components: vec![iso(vec![0.0, 0.0], 0.0, 1.0)],
            seed: None,
        };
        let x = sample_gmm(&spec, 3, 7).unwrap();
        assert!(x.values().iter().all(|&v| v == 0.0));
        assert_eq!(x.labels().unwrap(), &[0, 0, 0]);
    }

    #[test]
    fn equal_weights_are_binomial() {
        let spec = GmmSpec {
            components: vec![iso(vec![-1.0], 1.0, 0.5), iso(vec![1.0], 1.0, 0.5)],
            seed: None,
        };
        let n = 10_000;
        let x = sample_gmm(&spec, n, 2024).unwrap();
        let ones = x.labels().unwrap().iter().filter(|&&l| l == 1).count() as f64;
        let sd = (n as f64 * 0.25).sqrt();
        assert!((ones - 5000.0).abs() < 3.0 * sd, "count {ones}");
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let spec = GmmSpec {
            components: vec![GmmComponent {
                mean: vec![0.0, 0.0],
                cov: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
                weight: 1.0,
            }],
            seed: None,
        };
        match sample_gmm(&spec, 5, 1) {
            Err(Error::NotPsd {
                component: 0,
                min_eigenvalue,
            }) => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_weights() {
        let spec = GmmSpec {
            components: vec![iso(vec![0.0], 1.0, 0.5), iso(vec![1.0], 1.0, 0.4)],
            seed: None,
        };
        assert!(matches!(
            sample_gmm(&spec, 5, 1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn same_seed_same_sample() {
        let spec = GmmSpec {
            components: vec![iso(vec![0.0, 1.0], 2.0, 0.3), iso(vec![5.0, 1.0], 1.0, 0.7)],
            seed: None,
        };
        let a = sample_gmm(&spec, 200, 11).unwrap();
        let b = sample_gmm(&spec, 200, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_gmm(&spec, 200, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn json_layout_round_trips() {
        let text = r#"{"components":[{"mean":[0,1],"cov":[[1,0],[0,1]],"weight":1.0}],"seed":3}"#;
        let spec: GmmSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.seed, Some(3));
        assert_eq!(spec.components[0].mean, vec![0.0, 1.0]);
    }
}
