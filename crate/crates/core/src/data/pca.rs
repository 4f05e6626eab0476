use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1};

use super::InputMatrix;
use crate::error::{Error, Result};

/// Result of [`pca_project`]: the projected data and the fitted map.
#[derive(Debug, Clone)]
pub struct PcaProjection {
    /// Centered data expressed in the principal basis (`n x target_dim`).
    pub projected: InputMatrix,
    /// Column means of the original data.
    pub mean: Array1<f64>,
    /// Orthonormal directions as rows (`target_dim x d`), by descending variance.
    pub directions: Array2<f64>,
    /// Sample variances along each direction (zero for padded components).
    pub variances: Vec<f64>,
    /// Set when fewer than `target_dim` directions carry variance.
    pub zero_padded: bool,
}

impl PcaProjection {
    /// Maps a new input row with the fitted mean and directions.
    pub fn project(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let centered = &x - &self.mean;
        self.directions.dot(&centered)
    }

    pub fn project_rows(&self, x: &Array2<f64>) -> Array2<f64> {
        let centered = x - &self.mean;
        centered.dot(&self.directions.t())
    }
}

/// Principal component projection onto the top `target_dim` directions of the
/// sample covariance. Each direction is signed so that its largest-magnitude
/// entry is positive. Directions beyond the numerical rank are filled with
/// orthonormal completions, carry zero variance and set `zero_padded`.
pub fn pca_project(x: &InputMatrix, target_dim: usize) -> Result<PcaProjection> {
    let (n, d) = (x.nrows(), x.ncols());
    if target_dim == 0 || target_dim > n.min(d) {
        return Err(Error::invalid(format!(
            "target dimension {target_dim} must lie in 1..={}",
            n.min(d)
        )));
    }
    let values = x.values();
    let mean = values.mean_axis(ndarray::Axis(0)).expect("non-empty");
    let centered = values - &mean;
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = centered.t().dot(&centered) / denom;

    let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |r, c| cov[[r, c]]));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let lead = eig.eigenvalues[order[0]].max(0.0);
    let cutoff = lead * 1e-12 * d as f64;

    let mut directions = Array2::zeros((target_dim, d));
    let mut variances = Vec::with_capacity(target_dim);
    let mut zero_padded = false;
    for (k, &idx) in order.iter().take(target_dim).enumerate() {
        let lambda = eig.eigenvalues[idx];
        let v = eig.eigenvectors.column(idx);
        let mut dir: Vec<f64> = v.iter().copied().collect();
        let pivot = dir
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, &e)| {
                if e.abs() > bv + 1e-12 {
                    (i, e.abs())
                } else {
                    (bi, bv)
                }
            })
            .0;
        if dir[pivot] < 0.0 {
            dir.iter_mut().for_each(|e| *e = -*e);
        }
        if lambda <= cutoff {
            zero_padded = true;
            variances.push(0.0);
        } else {
            variances.push(lambda);
        }
        directions.row_mut(k).assign(&Array1::from(dir));
    }
    if zero_padded {
        warn!("data rank is below the requested {target_dim} components; trailing components are zero");
    }
    let mut projected = centered.dot(&directions.t());
    for (k, &var) in variances.iter().enumerate() {
        if var == 0.0 {
            projected.column_mut(k).fill(0.0);
        }
    }
    let mut out = InputMatrix::new(projected)?;
    if let Some(l) = x.labels() {
        out = out.with_labels(l.to_vec())?;
    }
    if let Some(p) = x.param() {
        out = out.with_param(p.to_vec())?;
    }
    Ok(PcaProjection {
        projected: out,
        mean,
        directions,
        variances,
        zero_padded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::stream_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, scales: &[f64], seed: u64) -> InputMatrix {
        let mut rng = stream_rng(seed, 0);
        let d = scales.len();
        let v = Array2::from_shape_fn((n, d), |(_, j)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scales[j]
        });
        InputMatrix::new(v).unwrap()
    }

    #[test]
    fn full_rank_2d_is_a_rotation() {
        let x = gaussian(50, &[2.0, 0.5], 1);
        let p = pca_project(&x, 2).unwrap();
        let back = p.projected.values().dot(&p.directions) + &p.mean;
        let err = (&back - x.values())
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-12);
        let gram = p.directions.dot(&p.directions.t());
        assert!((gram[[0, 0]] - 1.0).abs() < 1e-12 && gram[[0, 1]].abs() < 1e-12);
        assert!(!p.zero_padded);
    }

    #[test]
    fn leading_axis_found() {
        let x = gaussian(10_000, &[0.5, 3.0, 1.0], 2);
        let p = pca_project(&x, 1).unwrap();
        assert!(p.directions[[0, 1]].abs() > 0.99);
        assert!(p.directions[[0, 1]] > 0.0);
    }

    #[test]
    fn outputs_are_centered_and_uncorrelated() {
        let x = gaussian(300, &[1.0, 2.0, 0.3, 4.0], 3);
        let p = pca_project(&x, 3).unwrap();
        let y = p.projected.values();
        let m = y.mean_axis(ndarray::Axis(0)).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-10));
        let c = y.t().dot(y) / (y.nrows() - 1) as f64;
        for a in 0..3 {
            for b in 0..a {
                assert!(c[[a, b]].abs() < 1e-8 * c[[0, 0]]);
            }
        }
    }

    #[test]
    fn rank_deficit_pads_with_zeros() {
        let v = Array2::from_shape_fn((20, 3), |(i, j)| if j == 0 { i as f64 } else { 0.0 });
        let p = pca_project(&InputMatrix::new(v).unwrap(), 2).unwrap();
        assert!(p.zero_padded);
        assert_eq!(p.variances[1], 0.0);
        assert!(p.projected.values().column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn target_dim_too_large() {
        let x = gaussian(5, &[1.0, 1.0], 4);
        assert!(pca_project(&x, 3).is_err());
    }

    #[test]
    fn project_matches_fit() {
        let x = gaussian(40, &[1.0, 2.0, 3.0], 5);
        let p = pca_project(&x, 2).unwrap();
        let row = p.project(x.row(7));
        for k in 0..2 {
            assert!((row[k] - p.projected.values()[[7, k]]).abs() < 1e-12);
        }
    }
}
