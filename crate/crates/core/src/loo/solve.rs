use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::{LooProblem, Sym2};
use crate::error::{Error, Result};

/// Start set and tolerances of the multi-start minimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveStrategy {
    /// Grid points per axis over the frozen bounding box (inflated by 20%).
    pub grid: usize,
    /// Cap on the number of frozen points used as starts (`None` = all).
    /// When capped, the most similar points are kept first and the rest are
    /// subsampled evenly.
    pub max_point_starts: Option<usize>,
    /// Additional starting points.
    pub extra_starts: Vec<[f64; 2]>,
    /// Minima closer than this fraction of the frozen bounding-box diagonal are merged.
    pub dedup_radius: f64,
    /// Converged when `|grad| < grad_tol * (1 + |loss|)`.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for SolveStrategy {
    fn default() -> Self {
        Self {
            grid: 10,
            max_point_starts: None,
            extra_starts: Vec::new(),
            dedup_radius: 1e-3,
            grad_tol: 1e-8,
            max_iter: 500,
        }
    }
}

impl SolveStrategy {
    /// A cheaper start set for batch use.
    pub fn fast() -> Self {
        Self {
            grid: 6,
            max_point_starts: Some(60),
            ..Self::default()
        }
    }

    pub fn with_extra_start(mut self, y: [f64; 2]) -> Self {
        self.extra_starts.push(y);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalMinimum {
    pub y: [f64; 2],
    pub loss: f64,
}

/// Result of [`solve_loo_map`]: the global minimizer among all located
/// minima, which are sorted by loss.
#[derive(Debug, Clone)]
pub struct LooSolution {
    pub argmin: [f64; 2],
    pub loss: f64,
    pub minima: Vec<LocalMinimum>,
    pub starts: usize,
    pub converged: usize,
}

pub(crate) enum Descent {
    Converged(LocalMinimum),
    Stalled { y: [f64; 2], loss: f64 },
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn converged(loss: f64, grad: [f64; 2], tol: f64) -> bool {
    norm(grad) < tol * (1.0 + loss.abs())
}

/// Newton step on the Hessian with eigenvalues replaced by their magnitudes
/// (floored), which is a descent direction even at indefinite points.
fn modified_newton(h: &Sym2, g: [f64; 2]) -> [f64; 2] {
    let (l1, l2) = h.eigenvalues();
    let floor = 1e-10 * l1.abs().max(l2.abs()).max(1e-300);
    let v1 = h.min_eigenvector();
    let v2 = [-v1[1], v1[0]];
    let (m1, m2) = (l1.abs().max(floor), l2.abs().max(floor));
    let c1 = (v1[0] * g[0] + v1[1] * g[1]) / m1;
    let c2 = (v2[0] * g[0] + v2[1] * g[1]) / m2;
    [-(c1 * v1[0] + c2 * v2[0]), -(c1 * v1[1] + c2 * v2[1])]
}

/// Damped Newton descent with Armijo backtracking and saddle escape.
/// A point counts as converged when the gradient test passes, the Hessian
/// is positive semidefinite and the Newton step to the nearby stationary point
/// is shorter than `resolution` (so flat valleys are followed to their bottom).
pub(crate) fn descend(
    problem: &LooProblem,
    start: [f64; 2],
    tol: f64,
    resolution: f64,
    max_iter: usize,
) -> Descent {
    let max_step = 0.25 * problem.scale().max(1.0);
    let mut y = start;
    let mut e = problem.eval(y);
    let mut escapes = 0;
    for _ in 0..max_iter {
        if converged(e.loss, e.grad, tol) {
            let (lmin, lmax) = e.hess.eigenvalues();
            if lmin > -1e-12 * lmax.abs().max(1e-300) {
                let p = modified_newton(&e.hess, e.grad);
                if norm(p) < resolution || lmin <= 0.0 {
                    return Descent::Converged(LocalMinimum { y, loss: e.loss });
                }
                // Resolved gradient but an unresolved location: keep going.
            } else {
                if escapes >= 8 {
                    break;
                }
                escapes += 1;
                let v = e.hess.min_eigenvector();
                let h = 1e-3 * problem.scale().max(1e-6);
                let cands = [
                    [y[0] + h * v[0], y[1] + h * v[1]],
                    [y[0] - h * v[0], y[1] - h * v[1]],
                ];
                let (best, le) = cands
                    .iter()
                    .map(|c| (*c, problem.loss(*c)))
                    .fold((y, e.loss), |b, c| if c.1 < b.1 { c } else { b });
                if le >= e.loss {
                    break;
                }
                y = best;
                e = problem.eval(y);
                continue;
            }
        }
        let mut p = modified_newton(&e.hess, e.grad);
        let mut slope = p[0] * e.grad[0] + p[1] * e.grad[1];
        if !(slope < 0.0) || !p[0].is_finite() || !p[1].is_finite() {
            p = [-e.grad[0], -e.grad[1]];
            slope = -(e.grad[0] * e.grad[0] + e.grad[1] * e.grad[1]);
        }
        let len = norm(p);
        if len > max_step {
            let s = max_step / len;
            p = [p[0] * s, p[1] * s];
            slope *= s;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = [y[0] + alpha * p[0], y[1] + alpha * p[1]];
            let lc = problem.loss(cand);
            if lc <= e.loss + 1e-4 * alpha * slope {
                accepted = Some(cand);
                break;
            }
            alpha *= 0.5;
        }
        let next = match accepted {
            Some(c) => c,
            None => {
                // At the resolution limit of the loss: accept the full step
                // only if it shrinks the gradient.
                let cand = [y[0] + p[0], y[1] + p[1]];
                if norm(problem.gradient(cand)) < norm(e.grad) {
                    cand
                } else if converged(e.loss, e.grad, tol) && e.hess.eigenvalues().0 >= 0.0 {
                    return Descent::Converged(LocalMinimum { y, loss: e.loss });
                } else {
                    break;
                }
            }
        };
        y = next;
        e = problem.eval(y);
    }
    if converged(e.loss, e.grad, tol) && e.hess.eigenvalues().0 >= 0.0 {
        Descent::Converged(LocalMinimum { y, loss: e.loss })
    } else {
        Descent::Stalled { y, loss: e.loss }
    }
}

/// Frozen-box grid (inflated by 20%) with `k` points per axis.
pub(crate) fn box_grid(problem: &LooProblem, k: usize) -> Vec<[f64; 2]> {
    if k == 0 {
        return Vec::new();
    }
    let (lo, hi) = inflated_bounds(problem.frozen(), 0.2);
    let mut out = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            let t = |i: usize| {
                if k == 1 {
                    0.5
                } else {
                    i as f64 / (k - 1) as f64
                }
            };
            out.push([
                lo[0] + t(a) * (hi[0] - lo[0]),
                lo[1] + t(b) * (hi[1] - lo[1]),
            ]);
        }
    }
    out
}

/// Bounding box of `pts` with each side widened by `frac` of its length in total.
pub fn inflated_bounds(pts: &[[f64; 2]], frac: f64) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pts {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    for c in 0..2 {
        let pad = 0.5 * frac * (hi[c] - lo[c]).max(1e-6);
        lo[c] -= pad;
        hi[c] += pad;
    }
    (lo, hi)
}

fn start_set(problem: &LooProblem, strategy: &SolveStrategy) -> Vec<[f64; 2]> {
    let frozen = problem.frozen();
    let u = problem.column();
    let mut starts: Vec<[f64; 2]> = strategy.extra_starts.clone();

    match strategy.max_point_starts {
        Some(cap) if cap < frozen.len() => {
            let mut order: Vec<usize> = (0..frozen.len()).collect();
            order.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then(a.cmp(&b)));
            let top = cap.div_ceil(2);
            let mut chosen: Vec<usize> = order[..top].to_vec();
            let rest = cap - top;
            if rest > 0 {
                let stride = frozen.len() as f64 / rest as f64;
                chosen.extend(
                    (0..rest).map(|j| ((j as f64 * stride) as usize).min(frozen.len() - 1)),
                );
            }
            chosen.sort_unstable();
            chosen.dedup();
            starts.extend(chosen.into_iter().map(|k| frozen[k]));
        }
        _ => starts.extend_from_slice(frozen),
    }

    let m = frozen.len() as f64;
    let centroid = frozen
        .iter()
        .fold([0.0; 2], |a, p| [a[0] + p[0] / m, a[1] + p[1] / m]);
    starts.push(centroid);
    let total: f64 = u.iter().sum();
    let weighted = frozen.iter().zip(u).fold([0.0; 2], |a, (p, &w)| {
        [a[0] + p[0] * w / total, a[1] + p[1] * w / total]
    });
    starts.push(weighted);
    starts.extend(box_grid(problem, strategy.grid));
    starts
}

/// Deduplicates converged minima (sorted by loss) at the given radius.
pub(crate) fn dedup_minima(mut found: Vec<LocalMinimum>, radius: f64) -> Vec<LocalMinimum> {
    found.sort_by(|a, b| a.loss.total_cmp(&b.loss).then(a.y[0].total_cmp(&b.y[0])));
    let mut kept: Vec<LocalMinimum> = Vec::new();
    for m in found {
        if kept
            .iter()
            .all(|k| (k.y[0] - m.y[0]).hypot(k.y[1] - m.y[1]) > radius)
        {
            kept.push(m);
        }
    }
    kept
}

/// Runs local descents from an explicit set of starts.
pub(crate) fn solve_from(
    problem: &LooProblem,
    starts: &[[f64; 2]],
    strategy: &SolveStrategy,
) -> Result<LooSolution> {
    let resolution = 0.1 * strategy.dedup_radius * problem.scale();
    let results: Vec<Descent> = starts
        .par_iter()
        .map(|&s| descend(problem, s, strategy.grad_tol, resolution, strategy.max_iter))
        .collect();
    let mut found = Vec::new();
    let mut best_failed: Option<([f64; 2], f64)> = None;
    for r in results {
        match r {
            Descent::Converged(m) => found.push(m),
            Descent::Stalled { y, loss } => {
                if best_failed.is_none_or(|b| loss < b.1) {
                    best_failed = Some((y, loss));
                }
            }
        }
    }
    let converged = found.len();
    if found.is_empty() {
        let (best, best_loss) = best_failed.unwrap_or(([f64::NAN; 2], f64::NAN));
        return Err(Error::NoConvergence { best, best_loss });
    }
    let minima = dedup_minima(found, strategy.dedup_radius * problem.scale());
    Ok(LooSolution {
        argmin: minima[0].y,
        loss: minima[0].loss,
        minima,
        starts: starts.len(),
        converged,
    })
}

/// Global minimization of the LOO loss by multi-start local descent from
/// frozen points, centroids, a coarse grid and any extra starts.
pub fn solve_loo_map(problem: &LooProblem, strategy: &SolveStrategy) -> Result<LooSolution> {
    let starts = start_set(problem, strategy);
    solve_from(problem, &starts, strategy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_attractor() -> LooProblem {
        LooProblem::from_embedding(
            &ndarray::array![[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]],
            None,
            vec![0.2, 0.0, 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn finds_stationary_minimum() {
        let p = single_attractor();
        let s = solve_loo_map(&p, &SolveStrategy::default()).unwrap();
        let e = p.eval(s.argmin);
        assert!(norm(e.grad) < 1e-8 * (1.0 + e.loss.abs()));
        assert!(e.hess.eigenvalues().0 > 0.0);
        assert!(s.minima.iter().all(|m| m.loss >= s.loss));
    }

    #[test]
    fn refinement_keeps_argmin() {
        let p = single_attractor();
        let a = solve_loo_map(&p, &SolveStrategy::default()).unwrap();
        let b = solve_loo_map(
            &p,
            &SolveStrategy {
                grid: 25,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((a.argmin[0] - b.argmin[0]).hypot(a.argmin[1] - b.argmin[1]) < 1e-6);
    }

    #[test]
    fn saddle_is_not_reported() {
        // Two symmetric attractors: the midpoint is a saddle of the loss.
        let p = LooProblem::from_embedding(
            &ndarray::array![[-5.0, 0.0], [5.0, 0.0]],
            None,
            vec![2.0, 2.0],
        )
        .unwrap();
        assert!(p.eval([0.0, 0.0]).hess.eigenvalues().0 < 0.0);
        match descend(&p, [0.0, 0.0], 1e-8, 1e-4, 500) {
            Descent::Converged(m) => assert!(m.y[0].abs() > 1.0, "stopped at {:?}", m.y),
            Descent::Stalled { .. } => panic!("descent stalled"),
        }
    }
}
