use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Core,
    Border,
    Noise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dbscan {
    /// Cluster id per point, `None` for noise.
    pub labels: Vec<Option<usize>>,
    pub kinds: Vec<PointKind>,
    pub clusters: usize,
    pub eps: f64,
    pub min_pts: usize,
}

impl Dbscan {
    /// Border and noise points.
    pub fn periphery(&self) -> Vec<bool> {
        self.kinds.iter().map(|k| *k != PointKind::Core).collect()
    }
}

fn rows(points: &Array2<f64>) -> Vec<&[f64]> {
    points
        .rows()
        .into_iter()
        .map(|r| r.to_slice().expect("standard layout"))
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Density clustering; `min_pts` counts the point itself.
pub fn dbscan(points: &Array2<f64>, eps: f64, min_pts: usize) -> Result<Dbscan> {
    if !(eps > 0.0) || !eps.is_finite() || min_pts == 0 {
        return Err(Error::invalid(format!(
            "dbscan needs eps > 0 and min_pts >= 1, got {eps} and {min_pts}"
        )));
    }
    let pts = rows(points);
    let n = pts.len();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| dist(pts[i], pts[j]) <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut labels = vec![None; n];
    let mut clusters = 0;
    for seed in 0..n {
        if !core[seed] || labels[seed].is_some() {
            continue;
        }
        labels[seed] = Some(clusters);
        let mut stack = vec![seed];
        while let Some(p) = stack.pop() {
            for &q in &neighbours[p] {
                if labels[q].is_none() {
                    labels[q] = Some(clusters);
                    if core[q] {
                        stack.push(q);
                    }
                }
            }
        }
        clusters += 1;
    }
    let kinds = (0..n)
        .map(|i| match (core[i], labels[i]) {
            (true, _) => PointKind::Core,
            (false, Some(_)) => PointKind::Border,
            (false, None) => PointKind::Noise,
        })
        .collect();
    Ok(Dbscan {
        labels,
        kinds,
        clusters,
        eps,
        min_pts,
    })
}

/// Distance of every point to its `k`-th nearest other point, ascending.
pub fn k_distances(points: &Array2<f64>, k: usize) -> Result<Vec<f64>> {
    let pts = rows(points);
    let n = pts.len();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} must lie in [1, {n})")));
    }
    let mut out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| dist(pts[i], pts[j]))
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Knee of an ascending curve: the point farthest below the chord joining its
/// first and last values (index-normalized).
pub fn knee_value(sorted: &[f64]) -> Option<f64> {
    let m = sorted.len();
    if m < 3 {
        return sorted.last().copied();
    }
    let (lo, hi) = (sorted[0], sorted[m - 1]);
    if hi <= lo {
        return Some(hi);
    }
    let gap = |j: usize| {
        let t = j as f64 / (m - 1) as f64;
        (lo + t * (hi - lo)) - sorted[j]
    };
    let best = (0..m).max_by(|&a, &b| gap(a).total_cmp(&gap(b)).then(b.cmp(&a)))?;
    Some(sorted[best])
}

/// Pre-screening parameters: `min_pts` and the radius (knee of the
/// `(min_pts - 1)`-distance curve when unset).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrescreenConfig {
    pub min_pts: usize,
    pub eps: Option<f64>,
}

impl Default for PrescreenConfig {
    fn default() -> Self {
        Self {
            min_pts: 10,
            eps: None,
        }
    }
}

impl PrescreenConfig {
    pub fn run(&self, points: &Array2<f64>) -> Result<Dbscan> {
        let eps = match self.eps {
            Some(e) => e,
            None => {
                let k = self.min_pts.saturating_sub(1).max(1);
                let kd = k_distances(points, k)?;
                knee_value(&kd).filter(|e| *e > 0.0).ok_or_else(|| {
                    Error::invalid("all points coincide; no density radius can be chosen")
                })?
            }
        };
        dbscan(points, eps, self.min_pts)
    }
}
