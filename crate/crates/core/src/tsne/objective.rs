use ndarray::Array2;

use super::SimilarityMatrix;
use crate::error::{Error, Result};

/// Student-t kernel `1 / (1 + |a - b|^2)` between two embedding points.
#[inline]
pub fn kernel_w(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    1.0 / (1.0 + dx * dx + dy * dy)
}

fn check(y: &Array2<f64>, v: &SimilarityMatrix) -> Result<()> {
    if y.ncols() != 2 || y.nrows() != v.n() {
        return Err(Error::invalid(format!(
            "embedding is {}x{}, expected {}x2",
            y.nrows(),
            y.ncols(),
            v.n()
        )));
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("embedding contains non-finite values"));
    }
    Ok(())
}

fn points(y: &Array2<f64>) -> Vec<[f64; 2]> {
    y.rows().into_iter().map(|r| [r[0], r[1]]).collect()
}

/// Total loss `sum_{i<j} -2 v_ij log w_ij + log sum_{k != l} w_kl`.
pub fn total_loss(y: &Array2<f64>, v: &SimilarityMatrix) -> Result<f64> {
    check(y, v)?;
    let pts = points(y);
    let vals = v.values();
    let n = pts.len();
    let (mut attract, mut z) = (0.0, 0.0);
    for i in 0..n {
        let row = vals.row(i);
        let vi = row.as_slice().expect("standard layout");
        for j in (i + 1)..n {
            let w = kernel_w(pts[i], pts[j]);
            attract -= 2.0 * vi[j] * w.ln();
            z += w;
        }
    }
    Ok(attract + (2.0 * z).ln())
}

/// Gradient of [`total_loss`] with respect to every embedding point.
pub fn total_gradient(y: &Array2<f64>, v: &SimilarityMatrix) -> Result<Array2<f64>> {
    check(y, v)?;
    let mut grad = Array2::zeros((y.nrows(), 2));
    gradient_into(&points(y), v.values(), 1.0, &mut grad);
    Ok(grad)
}

/// Gradient with the attraction weights scaled by `exaggeration`.
/// Returns the normalizer `Z = sum_{k != l} w_kl`.
pub(crate) fn gradient_into(
    pts: &[[f64; 2]],
    v: &Array2<f64>,
    exaggeration: f64,
    grad: &mut Array2<f64>,
) -> f64 {
    let n = pts.len();
    // Attraction and unnormalized repulsion accumulated separately so that
    // the repulsion can be scaled by 1/Z afterwards.
    let mut att = vec![[0.0f64; 2]; n];
    let mut rep = vec![[0.0f64; 2]; n];
    let mut z = 0.0;
    let vs = v.as_slice().expect("standard layout");
    for i in 0..n {
        let [xi, yi] = pts[i];
        let vi = &vs[i * n..(i + 1) * n];
        let (mut ai, mut ri) = ([0.0f64; 2], [0.0f64; 2]);
        for j in (i + 1)..n {
            let dx = xi - pts[j][0];
            let dy = yi - pts[j][1];
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            z += w;
            let a = vi[j] * w;
            let r = w * w;
            ai[0] += a * dx;
            ai[1] += a * dy;
            ri[0] += r * dx;
            ri[1] += r * dy;
            att[j][0] -= a * dx;
            att[j][1] -= a * dy;
            rep[j][0] -= r * dx;
            rep[j][1] -= r * dy;
        }
        att[i][0] += ai[0];
        att[i][1] += ai[1];
        rep[i][0] += ri[0];
        rep[i][1] += ri[1];
    }
    let z = 2.0 * z;
    for i in 0..n {
        for c in 0..2 {
            grad[[i, c]] = 4.0 * (exaggeration * att[i][c] - rep[i][c] / z);
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_w([1.0, 2.0], [1.0, 2.0]), 1.0);
        assert_eq!(kernel_w([0.0, 0.0], [0.6, 0.8]), 0.5);
        assert!((kernel_w([0.0, 0.0], [3.0, 0.0]) - 0.1).abs() < 1e-16);
    }

    #[test]
    fn two_coincident_points() {
        let v = SimilarityMatrix::from_values(array![[0.0, 0.5], [0.5, 0.0]]).unwrap();
        let y = array![[0.3, -1.0], [0.3, -1.0]];
        assert!((total_loss(&y, &v).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_pair_has_antisymmetric_gradient() {
        let v = SimilarityMatrix::from_values(array![[0.0, 0.5], [0.5, 0.0]]).unwrap();
        let y = array![[1.5, 0.5], [-1.5, -0.5]];
        let g = total_gradient(&y, &v).unwrap();
        assert!((g[[0, 0]] + g[[1, 0]]).abs() < 1e-15);
        assert!((g[[0, 1]] + g[[1, 1]]).abs() < 1e-15);
    }

    #[test]
    fn rejects_nan() {
        let v = SimilarityMatrix::from_values(array![[0.0, 0.5], [0.5, 0.0]]).unwrap();
        let y = array![[f64::NAN, 0.0], [0.0, 0.0]];
        assert!(total_loss(&y, &v).is_err());
    }
}
