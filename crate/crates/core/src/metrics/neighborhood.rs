use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::sq_dist;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodPreservation {
    pub k: usize,
    pub scores: Vec<f64>,
    /// Points whose distance vector had zero variance (score set to 0).
    pub flagged: Vec<bool>,
    pub median: f64,
}

/// Pearson correlation, `None` if either side has zero variance.
pub(crate) fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    }
}

/// Default neighbourhood size `floor(n / 5)`.
pub fn default_k(n: usize) -> usize {
    n / 5
}

/// Per point, the correlation between distances to its `k` nearest input
/// neighbours and the corresponding embedding distances.
pub fn neighborhood_preservation(
    x: &Array2<f64>,
    y: &Array2<f64>,
    k: Option<usize>,
) -> Result<NeighborhoodPreservation> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::invalid("input and embedding row counts differ"));
    }
    let k = k.unwrap_or_else(|| default_k(n));
    if k < 2 || k >= n {
        return Err(Error::invalid(format!("k = {k} must lie in [2, {n})")));
    }
    let xr: Vec<&[f64]> = x
        .rows()
        .into_iter()
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();
    let yr: Vec<&[f64]> = y
        .rows()
        .into_iter()
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();
    let per_point: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut order: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(xr[i], xr[j]), j))
                .collect();
            order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let nb = &order[..k];
            let dx: Vec<f64> = nb.iter().map(|(d, _)| d.sqrt()).collect();
            let dy: Vec<f64> = nb
                .iter()
                .map(|&(_, j)| sq_dist(yr[i], yr[j]).sqrt())
                .collect();
            pearson(&dx, &dy)
        })
        .collect();
    let flagged: Vec<bool> = per_point.iter().map(Option::is_none).collect();
    let scores: Vec<f64> = per_point.into_iter().map(|s| s.unwrap_or(0.0)).collect();
    Ok(NeighborhoodPreservation {
        k,
        median: median(&scores),
        scores,
        flagged,
    })
}
