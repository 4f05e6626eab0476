//! Synthetic datasets used throughout the examples and tests.
//!
//! Covariance scales are chosen so that neighbouring components overlap in
//! their tails, which gives both kinds of map discontinuity something to act on.

use std::f64::consts::PI;

use super::{GmmComponent, GmmSpec, SwissRollSpec};

fn isotropic(mean: Vec<f64>, var: f64, weight: f64) -> GmmComponent {
    let d = mean.len();
    let cov = (0..d)
        .map(|r| (0..d).map(|c| if r == c { var } else { 0.0 }).collect())
        .collect();
    GmmComponent { mean, cov, weight }
}

/// Two equal-weight unit-variance Gaussians in the plane, `separation` apart
/// along the first axis.
pub fn two_gmm(separation: f64) -> GmmSpec {
    GmmSpec {
        components: vec![
            isotropic(vec![-separation / 2.0, 0.0], 1.0, 0.5),
            isotropic(vec![separation / 2.0, 0.0], 1.0, 0.5),
        ],
        seed: None,
    }
}

/// Clearly separated pair (gap of 8 standard deviations).
pub fn two_gmm_separated() -> GmmSpec {
    two_gmm(8.0)
}

/// Five planar components with unequal weights whose tails overlap.
pub fn five_gmm() -> GmmSpec {
    let weights = [0.3, 0.25, 0.2, 0.15, 0.1];
    let components = weights
        .iter()
        .enumerate()
        .map(|(j, &w)| {
            let a = 2.0 * PI * j as f64 / 5.0;
            isotropic(vec![4.0 * a.cos(), 4.0 * a.sin()], 1.0, w)
        })
        .collect();
    GmmSpec {
        components,
        seed: None,
    }
}

/// Eight equal-weight planar components on a 4 x 2 lattice.
pub fn eight_gmm() -> GmmSpec {
    let components = (0..8)
        .map(|j| {
            let (cx, cy) = ((j % 4) as f64, (j / 4) as f64);
            isotropic(vec![6.0 * cx, 6.0 * cy], 1.0, 0.125)
        })
        .collect();
    GmmSpec {
        components,
        seed: None,
    }
}

/// `k` equal-weight components in `d` dimensions with means spread along the
/// coordinate axes.
pub fn high_dim_gmm(k: usize, d: usize, spread: f64) -> GmmSpec {
    let components = (0..k)
        .map(|j| {
            let mut mean = vec![0.0; d];
            mean[j % d] = spread * if (j / d).is_multiple_of(2) { 1.0 } else { -1.0 };
            isotropic(mean, 1.0, 1.0 / k as f64)
        })
        .collect();
    GmmSpec {
        components,
        seed: None,
    }
}

/// A roll of one and a half turns.
pub fn swiss_roll(n: usize, seed: u64) -> SwissRollSpec {
    SwissRollSpec::new(n, [1.5 * PI, 4.5 * PI], [0.0, 20.0], seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample_gmm;

    #[test]
    fn presets_are_valid() {
        for spec in [
            two_gmm_separated(),
            five_gmm(),
            eight_gmm(),
            high_dim_gmm(4, 50, 5.0),
        ] {
            let x = sample_gmm(&spec, 50, 1).unwrap();
            assert_eq!(x.nrows(), 50);
        }
    }

    #[test]
    fn five_gmm_histogram_follows_weights() {
        let spec = five_gmm();
        let x = sample_gmm(&spec, 700, 3).unwrap();
        let mut counts = [0usize; 5];
        for &l in x.labels().unwrap() {
            counts[l] += 1;
        }
        for (j, c) in spec.components.iter().enumerate() {
            let p = c.weight;
            let sd = (700.0 * p * (1.0 - p)).sqrt();
            assert!(
                (counts[j] as f64 - 700.0 * p).abs() < 3.5 * sd,
                "{counts:?}"
            );
        }
    }
}
