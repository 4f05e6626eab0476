use std::collections::HashSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loo::Sym2;
use crate::tsne::SimilarityMatrix;

/// A symmetric 2x2 Hessian with its eigenvalues, `lambda_min <= lambda_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hessian2 {
    pub matrix: Sym2,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Hessian2 {
    pub fn new(matrix: Sym2) -> Self {
        let (lambda_min, lambda_max) = matrix.eigenvalues();
        Self {
            matrix,
            lambda_min,
            lambda_max,
        }
    }

    /// `1 / lambda_min`, or `None` when the curvature is not positive.
    pub fn singularity_score(&self) -> Option<f64> {
        (self.lambda_min > 0.0).then(|| 1.0 / self.lambda_min)
    }
}

/// Unordered point pairs of a LargeVis neighbour graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<(usize, usize)>", into = "Vec<(usize, usize)>")]
pub struct EdgeSet {
    pairs: HashSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            pairs: pairs
                .into_iter()
                .filter(|(a, b)| a != b)
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect(),
        }
    }

    /// Every pair with a positive similarity.
    pub fn from_similarity(v: &SimilarityMatrix) -> Self {
        let n = v.n();
        let vals = v.values();
        Self::from_pairs(
            (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .filter(|&(i, j)| vals[[i, j]] > 0.0),
        )
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.pairs.contains(&(a.min(b), a.max(b)))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl From<Vec<(usize, usize)>> for EdgeSet {
    fn from(v: Vec<(usize, usize)>) -> Self {
        Self::from_pairs(v)
    }
}

impl From<EdgeSet> for Vec<(usize, usize)> {
    fn from(e: EdgeSet) -> Self {
        let mut v: Vec<_> = e.pairs.into_iter().collect();
        v.sort_unstable();
        v
    }
}

fn check_shapes(y: &Array2<f64>, v: &SimilarityMatrix) -> Result<usize> {
    let n = y.nrows();
    if y.ncols() != 2 || v.n() != n {
        return Err(Error::invalid(format!(
            "embedding is {}x{} but similarities cover {} points",
            n,
            y.ncols(),
            v.n()
        )));
    }
    Ok(n)
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(Error::invalid(format!(
            "index {i} out of range for {n} points"
        )));
    }
    Ok(())
}

fn diff(y: &Array2<f64>, i: usize, k: usize) -> [f64; 2] {
    [y[[i, 0]] - y[[k, 0]], y[[i, 1]] - y[[k, 1]]]
}

fn outer(d: [f64; 2]) -> Sym2 {
    Sym2 {
        a: d[0] * d[0],
        b: d[0] * d[1],
        c: d[1] * d[1],
    }
}

/// Shared t-SNE quantities: `Z = sum_{k != l} w_kl` and, per point,
/// `S_i = sum_{l != i} w_il^2 (y_i - y_l)`.
#[derive(Debug, Clone)]
pub struct TsneHessians<'a> {
    y: &'a Array2<f64>,
    v: &'a SimilarityMatrix,
    z: f64,
    s: Vec<[f64; 2]>,
}

impl<'a> TsneHessians<'a> {
    pub fn new(y: &'a Array2<f64>, v: &'a SimilarityMatrix) -> Result<Self> {
        let n = check_shapes(y, v)?;
        if n < 2 {
            return Err(Error::invalid("need at least two points"));
        }
        let mut z = 0.0;
        let mut s = vec![[0.0; 2]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = diff(y, i, j);
                let w = 1.0 / (1.0 + d[0] * d[0] + d[1] * d[1]);
                z += 2.0 * w;
                let w2 = w * w;
                s[i][0] += w2 * d[0];
                s[i][1] += w2 * d[1];
                s[j][0] -= w2 * d[0];
                s[j][1] -= w2 * d[1];
            }
        }
        Ok(Self { y, v, z, s })
    }

    /// `H_i = -sum_{j != i} H_ij`. The cross term sums `S_j` over `j != i`,
    /// which equals `-S_i` because the `S_j` sum to zero.
    pub fn hessian(&self, i: usize) -> Result<Hessian2> {
        let n = self.y.nrows();
        check_index(i, n)?;
        let vals = self.v.values();
        let inv_z = 1.0 / self.z;
        let mut iso = 0.0;
        let mut rank = Sym2::ZERO;
        for j in (0..n).filter(|&j| j != i) {
            let d = diff(self.y, i, j);
            let w = 1.0 / (1.0 + d[0] * d[0] + d[1] * d[1]);
            let vij = vals[[i, j]];
            iso += 4.0 * vij * w - 4.0 * inv_z * w * w;
            let coef = -8.0 * vij * w * w + 16.0 * inv_z * w * w * w;
            rank = rank.add(&outer(d).scale(coef));
        }
        let cross = outer(self.s[i]).scale(-16.0 * inv_z * inv_z);
        let h = Sym2::identity().scale(iso).add(&rank).add(&cross);
        Ok(Hessian2::new(h))
    }
}

/// Hessian of the total t-SNE loss with respect to `y_i`.
pub fn singularity_hessian_tsne(
    y: &Array2<f64>,
    v: &SimilarityMatrix,
    i: usize,
) -> Result<Hessian2> {
    TsneHessians::new(y, v)?.hessian(i)
}

fn check_umap(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::invalid(format!(
            "UMAP needs a > 0 and b > 0, got a = {a}, b = {b}"
        )));
    }
    Ok(())
}

/// Hessian of the UMAP cross-entropy loss with respect to `y_i`, kernel
/// `w = 1 / (1 + a |d|^{2b})`.
pub fn singularity_hessian_umap(
    y: &Array2<f64>,
    v: &SimilarityMatrix,
    i: usize,
    a: f64,
    b: f64,
) -> Result<Hessian2> {
    let n = check_shapes(y, v)?;
    check_index(i, n)?;
    check_umap(a, b)?;
    let vals = v.values();
    let mut h = Sym2::ZERO;
    for k in (0..n).filter(|&k| k != i) {
        let d = diff(y, i, k);
        let r = d[0] * d[0] + d[1] * d[1];
        if r == 0.0 {
            return Err(Error::invalid(format!("points {i} and {k} coincide")));
        }
        let s = a * r.powf(b);
        let w = 1.0 / (1.0 + s);
        let vik = vals[[i, k]];
        let r1 = r.powf(b - 1.0);
        let r2 = r.powf(b - 2.0);
        let one_w = s * w;
        let iso = 2.0 * a * b * vik * w * r1 - 2.0 * a * b * (1.0 - vik) * w * w / one_w * r1;
        let dd = -4.0 * a * a * b * b * vik * w * w * r1 * r1
            + 4.0 * a * b * (b - 1.0) * vik * w * r2
            + a * a * b * b * w.powi(4) * (8.0 / w - 4.0) / (one_w * one_w) * (1.0 - vik) * r1 * r1
            - 4.0 * a * b * (b - 1.0) * w * w / one_w * (1.0 - vik) * r2;
        h = h.add(&Sym2::identity().scale(iso)).add(&outer(d).scale(dd));
    }
    Ok(Hessian2::new(h))
}

/// Hessian of the LargeVis objective
/// `sum_{E} v log w + gamma sum_{not E} log(1 - w)` with respect to `y_i`.
/// The objective is maximized, so a well-placed point has a negative
/// definite Hessian here.
pub fn singularity_hessian_largevis(
    y: &Array2<f64>,
    v: &SimilarityMatrix,
    edges: &EdgeSet,
    gamma: f64,
    i: usize,
) -> Result<Hessian2> {
    let n = check_shapes(y, v)?;
    check_index(i, n)?;
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!(
            "gamma must be finite and >= 0, got {gamma}"
        )));
    }
    let vals = v.values();
    let mut h = Sym2::ZERO;
    for k in (0..n).filter(|&k| k != i) {
        let d = diff(y, i, k);
        let r = d[0] * d[0] + d[1] * d[1];
        let w = 1.0 / (1.0 + r);
        let in_e = edges.contains(i, k);
        let weight = if in_e { vals[[i, k]] } else { gamma };
        if weight != 0.0 {
            h = h
                .add(&Sym2::identity().scale(-2.0 * weight * w))
                .add(&outer(d).scale(4.0 * weight * w * w));
        }
        if !in_e && gamma != 0.0 {
            if r == 0.0 {
                return Err(Error::invalid(format!(
                    "points {i} and {k} coincide in a repulsive term"
                )));
            }
            h = h
                .add(&Sym2::identity().scale(2.0 * gamma / r))
                .add(&outer(d).scale(-4.0 * gamma / (r * r)));
        }
    }
    Ok(Hessian2::new(h))
}

/// Total UMAP loss `sum_{i<j} -v log w - (1 - v) log(1 - w)`.
pub fn umap_total_loss(y: &Array2<f64>, v: &SimilarityMatrix, a: f64, b: f64) -> Result<f64> {
    let n = check_shapes(y, v)?;
    check_umap(a, b)?;
    let vals = v.values();
    let mut loss = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = diff(y, i, j);
            let s = a * (d[0] * d[0] + d[1] * d[1]).powf(b);
            // -log w = ln(1 + s), -log(1 - w) = ln(1 + s) - ln s
            let vij = vals[[i, j]];
            loss += s.ln_1p() - (1.0 - vij) * s.ln();
        }
    }
    Ok(loss)
}

/// Total LargeVis objective `sum_{i<j} 1_E v log w + gamma 1_{not E} log(1 - w)`.
pub fn largevis_total_loss(
    y: &Array2<f64>,
    v: &SimilarityMatrix,
    edges: &EdgeSet,
    gamma: f64,
) -> Result<f64> {
    let n = check_shapes(y, v)?;
    let vals = v.values();
    let mut loss = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = diff(y, i, j);
            let r = d[0] * d[0] + d[1] * d[1];
            if edges.contains(i, j) {
                loss -= vals[[i, j]] * r.ln_1p();
            } else if gamma != 0.0 {
                loss += gamma * (r.ln() - r.ln_1p());
            }
        }
    }
    Ok(loss)
}
