use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::data::sq_dist;
use crate::error::{Error, Result};

/// Rows grouped by label, with centroids.
struct Groups {
    members: Vec<Vec<usize>>,
    centroids: Vec<Vec<f64>>,
    grand: Vec<f64>,
}

fn groups(y: &Array2<f64>, labels: &[usize], min_classes: usize) -> Result<Groups> {
    let (n, d) = y.dim();
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    members.retain(|m| !m.is_empty());
    if members.len() < min_classes {
        return Err(Error::invalid(format!(
            "need at least {min_classes} non-empty classes"
        )));
    }
    let mean_of = |rows: &[usize]| -> Vec<f64> {
        (0..d)
            .map(|c| rows.iter().map(|&i| y[[i, c]]).sum::<f64>() / rows.len() as f64)
            .collect()
    };
    let centroids = members.iter().map(|m| mean_of(m)).collect();
    let all: Vec<usize> = (0..n).collect();
    Ok(Groups {
        grand: mean_of(&all),
        members,
        centroids,
    })
}

fn row(y: &Array2<f64>, i: usize) -> &[f64] {
    let d = y.ncols();
    &y.as_slice().expect("standard layout")[i * d..(i + 1) * d]
}

/// Davies-Bouldin index with Euclidean distances: the mean over classes of
/// `max_j (S_i + S_j) / |c_i - c_j|`, `S_i` the RMS distance to the centroid.
pub fn db_index(y: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    let y = y.as_standard_layout().into_owned();
    let g = groups(&y, labels, 2)?;
    let k = g.members.len();
    let spread: Vec<f64> = g
        .members
        .iter()
        .zip(&g.centroids)
        .map(|(m, c)| {
            (m.iter().map(|&i| sq_dist(row(&y, i), c)).sum::<f64>() / m.len() as f64).sqrt()
        })
        .collect();
    let mut total = 0.0;
    for a in 0..k {
        let mut worst = 0.0f64;
        for b in (0..k).filter(|&b| b != a) {
            let sep = sq_dist(&g.centroids[a], &g.centroids[b]).sqrt();
            let s = spread[a] + spread[b];
            let r = if sep > 0.0 {
                s / sep
            } else if s == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(r);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

fn scatter(y: &Array2<f64>, g: &Groups) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = y.ncols();
    let mut w = DMatrix::zeros(d, d);
    let mut t = DMatrix::zeros(d, d);
    for (m, c) in g.members.iter().zip(&g.centroids) {
        for &i in m {
            let r = row(y, i);
            for a in 0..d {
                for b in 0..d {
                    w[(a, b)] += (r[a] - c[a]) * (r[b] - c[b]);
                    t[(a, b)] += (r[a] - g.grand[a]) * (r[b] - g.grand[b]);
                }
            }
        }
    }
    (w, t)
}

/// Within-cluster over total sum of squares (1 for a single class).
pub fn wcdr(y: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    let y = y.as_standard_layout().into_owned();
    let g = groups(&y, labels, 1)?;
    let (w, t) = scatter(&y, &g);
    let tss = t.trace();
    if !(tss > 0.0) {
        return Err(Error::Singular("total sum of squares is zero".into()));
    }
    Ok((w.trace() / tss).clamp(0.0, 1.0))
}

/// Wilks' lambda `det(W) / det(T)` with `T = W + B`, evaluated on the range of
/// `T` so that data confined to a subspace still has a defined value.
pub fn wilks_lambda(y: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    let y = y.as_standard_layout().into_owned();
    let g = groups(&y, labels, 2)?;
    let (w, t) = scatter(&y, &g);
    let eig = SymmetricEigen::new(t);
    let top = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if !(top > 0.0) {
        return Err(Error::Singular("total scatter is zero".into()));
    }
    let cutoff = top * 1e-12 * y.ncols() as f64;
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&j| eig.eigenvalues[j] > cutoff)
        .collect();
    let basis = DMatrix::from_fn(y.ncols(), keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
    let w_r = basis.transpose() * w * &basis;
    // T is diagonal in its own eigenbasis
    let ratio = w_r.determinant() / keep.iter().map(|&j| eig.eigenvalues[j]).product::<f64>();
    Ok(ratio.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn point_masses() {
        let y = array![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        let l = [0, 0, 1, 1];
        assert_eq!(wcdr(&y, &l).unwrap(), 0.0);
        assert_eq!(wilks_lambda(&y, &l).unwrap(), 0.0);
        assert_eq!(db_index(&y, &l).unwrap(), 0.0);
    }

    #[test]
    fn single_label_gives_unit_wcdr() {
        let y = array![[0.0, 0.0], [1.0, 2.0], [3.0, 1.0]];
        assert_eq!(wcdr(&y, &[0, 0, 0]).unwrap(), 1.0);
        assert_eq!(wcdr(&y, &[1, 1, 1]).unwrap(), 1.0);
        assert!(db_index(&y, &[0, 0, 0]).is_err());
        assert!(wilks_lambda(&y, &[0, 0, 0]).is_err());
    }

    #[test]
    fn known_db_value() {
        // spreads 1 and 1, centroid distance 4
        let y = array![[-1.0, 0.0], [1.0, 0.0], [3.0, 0.0], [5.0, 0.0]];
        let db = db_index(&y, &[0, 0, 1, 1]).unwrap();
        assert!((db - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wilks_matches_determinants_in_full_rank() {
        let y = array![
            [0.0, 0.0],
            [1.0, 0.5],
            [0.2, 1.0],
            [4.0, 4.0],
            [5.0, 4.2],
            [4.4, 5.1]
        ];
        let l = [0, 0, 0, 1, 1, 1];
        let g = groups(&y, &l, 2).unwrap();
        let (w, t) = scatter(&y, &g);
        let want = w.determinant() / t.determinant();
        assert!((wilks_lambda(&y, &l).unwrap() - want).abs() < 1e-12);
    }
}
