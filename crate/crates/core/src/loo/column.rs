use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::LooProblem;
use crate::data::{pairwise_sq_distances, sq_dist, InputMatrix};
use crate::error::{Error, Result};
use crate::tsne::{calibrate_with, RowBandwidth, SimilarityMatrix};

/// How the similarity column of a new or modified point is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ColumnMethod {
    /// Recalibrate every row on the changed data set (warm-started from the
    /// original bandwidths).
    #[default]
    Exact,
    /// Keep every original bandwidth and only calibrate the changed row.
    Approx2,
}

/// Below this fraction of a row's mass, removing one term from the stored
/// normalizer is recomputed directly instead of by subtraction.
const CANCELLATION_LIMIT: f64 = 1e-9;

/// In exact mode a row keeps its bandwidth when the changed term carries less
/// than this multiple of the entropy tolerance, old and new. The entropy then
/// moves by at most `p (|ln p| + ln n + 1)`, a small fraction of the tolerance.
const FROZEN_ROW_FACTOR: f64 = 1e-3;

/// Everything needed to build LOO problems against a fixed embedding: input
/// rows, their squared distances, calibrated bandwidths and kernel sums.
#[derive(Debug, Clone)]
pub struct LooContext {
    x: Array2<f64>,
    y: Array2<f64>,
    d: Array2<f64>,
    bandwidths: Vec<RowBandwidth>,
    perplexity: f64,
    tol: f64,
    z_all: f64,
    w_rows: Vec<f64>,
}

impl LooContext {
    /// `v` must carry the bandwidths it was calibrated with.
    pub fn new(x: &InputMatrix, y: &Array2<f64>, v: &SimilarityMatrix, tol: f64) -> Result<Self> {
        let n = x.nrows();
        if y.nrows() != n || y.ncols() != 2 || v.n() != n {
            return Err(Error::invalid(format!(
                "inputs ({n} rows), embedding ({}x{}) and similarities ({}) disagree",
                y.nrows(),
                y.ncols(),
                v.n()
            )));
        }
        let (bandwidths, perplexity) = match (v.bandwidths(), v.perplexity()) {
            (Some(b), Some(p)) => (b.to_vec(), p),
            _ => {
                return Err(Error::invalid(
                    "similarities without calibrated bandwidths cannot be extended",
                ))
            }
        };
        let mut w_rows = vec![0.0; n];
        let mut z_all = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[[i, 0]] - y[[j, 0]];
                let dy = y[[i, 1]] - y[[j, 1]];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                w_rows[i] += w;
                w_rows[j] += w;
                z_all += 2.0 * w;
            }
        }
        Ok(Self {
            x: x.values().clone(),
            y: y.clone(),
            d: pairwise_sq_distances(x.values()),
            bandwidths,
            perplexity,
            tol,
            z_all,
            w_rows,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn perplexity(&self) -> f64 {
        self.perplexity
    }

    pub fn embedding_point(&self, i: usize) -> [f64; 2] {
        [self.y[[i, 0]], self.y[[i, 1]]]
    }

    fn distances_to(&self, x_new: &[f64]) -> Result<Vec<f64>> {
        if x_new.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, expected {}",
                x_new.len(),
                self.dim()
            )));
        }
        if x_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("point has non-finite coordinates"));
        }
        Ok(self
            .x
            .rows()
            .into_iter()
            .map(|r| sq_dist(r.as_slice().expect("standard layout"), x_new))
            .collect())
    }

    fn drow(&self, k: usize) -> &[f64] {
        let n = self.n();
        &self.d.as_slice().expect("standard layout")[k * n..(k + 1) * n]
    }

    fn calibrate<F, I>(&self, row: usize, others: F, guess: Option<f64>) -> Result<RowBandwidth>
    where
        F: Fn() -> I,
        I: Iterator<Item = f64>,
    {
        calibrate_with(others, self.perplexity, self.tol, guess)
            .map_err(|reason| Error::Calibration { row, reason })
    }
    fn frozen_row_limit(&self) -> f64 {
        FROZEN_ROW_FACTOR * self.tol
    }

    /// `p_{i|k}` after moving point `i` to squared distance `d_new` from `k`,
    /// keeping row `k`'s bandwidth.
    fn kept_bandwidth_prob(&self, k: usize, i: usize, d_new: f64) -> f64 {
        let bw = self.bandwidths[k];
        let row = self.drow(k);
        let mut rest = 1.0 - bw.prob(row[i]);
        if rest < CANCELLATION_LIMIT {
            rest = row
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k && *j != i)
                .map(|(_, &v)| bw.prob(v))
                .sum();
        }
        let e = bw.prob(d_new);
        e / (rest + e)
    }

    /// Similarity column `v_{k, n+1}` of a point appended to the data.
    pub fn add_one_column(&self, x_new: &[f64], method: ColumnMethod) -> Result<Vec<f64>> {
        let n = self.n();
        let delta = self.distances_to(x_new)?;
        let new_bw = self.calibrate(n, || delta.iter().copied(), None)?;
        let to_new: Vec<f64> = match method {
            ColumnMethod::Exact => (0..n)
                .into_par_iter()
                .map(|k| {
                    let e = self.bandwidths[k].prob(delta[k]);
                    if e < self.frozen_row_limit() {
                        return Ok(e / (1.0 + e));
                    }
                    let row = self.drow(k);
                    let bw = self.calibrate(
                        k,
                        || {
                            row.iter()
                                .enumerate()
                                .filter(move |(j, _)| *j != k)
                                .map(|(_, &v)| v)
                                .chain(std::iter::once(delta[k]))
                        },
                        Some(self.bandwidths[k].beta),
                    )?;
                    Ok(bw.prob(delta[k]))
                })
                .collect::<Result<_>>()?,
            ColumnMethod::Approx2 => (0..n)
                .map(|k| {
                    let e = self.bandwidths[k].prob(delta[k]);
                    e / (1.0 + e)
                })
                .collect(),
        };
        let scale = 1.0 / (2.0 * (n + 1) as f64);
        Ok((0..n)
            .map(|k| (to_new[k] + new_bw.prob(delta[k])) * scale)
            .collect())
    }

    /// Similarity column `v_{k, i}` (for `k != i`) after replacing input row
    /// `i` by `x_rep`.
    pub fn partial_column(
        &self,
        i: usize,
        x_rep: &[f64],
        method: ColumnMethod,
    ) -> Result<Vec<f64>> {
        let n = self.n();
        if i >= n {
            return Err(Error::invalid(format!(
                "index {i} out of range for {n} points"
            )));
        }
        let delta = self.distances_to(x_rep)?;
        let own = self.calibrate(
            i,
            || {
                delta
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i)
                    .map(|(_, &v)| v)
            },
            Some(self.bandwidths[i].beta),
        )?;
        let others: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        let to_i: Vec<f64> = match method {
            ColumnMethod::Exact => others
                .par_iter()
                .map(|&k| {
                    let bw = self.bandwidths[k];
                    let limit = self.frozen_row_limit();
                    if bw.prob(self.drow(k)[i]) < limit && bw.prob(delta[k]) < limit {
                        return Ok(self.kept_bandwidth_prob(k, i, delta[k]));
                    }
                    let row = self.drow(k);
                    let bw = self.calibrate(
                        k,
                        || {
                            row.iter()
                                .enumerate()
                                .filter(move |(j, _)| *j != k)
                                .map(|(j, &v)| if j == i { delta[k] } else { v })
                        },
                        Some(self.bandwidths[k].beta),
                    )?;
                    Ok(bw.prob(delta[k]))
                })
                .collect::<Result<_>>()?,
            ColumnMethod::Approx2 => others
                .iter()
                .map(|&k| self.kept_bandwidth_prob(k, i, delta[k]))
                .collect(),
        };
        let scale = 1.0 / (2.0 * n as f64);
        Ok(others
            .iter()
            .zip(&to_i)
            .map(|(&k, &p)| (p + own.prob(delta[k])) * scale)
            .collect())
    }

    /// LOO problem for a point appended to the data.
    pub fn add_one_problem(&self, x_new: &[f64], method: ColumnMethod) -> Result<LooProblem> {
        let u = self.add_one_column(x_new, method)?;
        let frozen = self.y.rows().into_iter().map(|r| [r[0], r[1]]).collect();
        LooProblem::new(frozen, u, self.z_all)
    }

    /// Partial LOO problem: point `i` is freed and its input replaced by `x_rep`.
    pub fn partial_problem(
        &self,
        i: usize,
        x_rep: &[f64],
        method: ColumnMethod,
    ) -> Result<LooProblem> {
        let u = self.partial_column(i, x_rep, method)?;
        let frozen = self
            .y
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .map(|(_, r)| [r[0], r[1]])
            .collect();
        let z = (self.z_all - 2.0 * self.w_rows[i]).max(0.0);
        LooProblem::new(frozen, u, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{presets, sample_gmm};
    use crate::tsne::similarity_matrix;

    fn setup(n: usize) -> (InputMatrix, LooContext, SimilarityMatrix) {
        let x = sample_gmm(&presets::two_gmm(4.0), n, 5).unwrap();
        let v = similarity_matrix(&x, 8.0, 1e-10).unwrap();
        let y = Array2::from_shape_fn((n, 2), |(i, c)| ((i * 7 + c * 3) % 11) as f64);
        let ctx = LooContext::new(&x, &y, &v, 1e-10).unwrap();
        (x, ctx, v)
    }

    #[test]
    fn unchanged_replacement_reproduces_the_column() {
        let (x, ctx, v) = setup(40);
        for method in [ColumnMethod::Exact, ColumnMethod::Approx2] {
            let u = ctx
                .partial_column(3, x.row(3).as_slice().unwrap(), method)
                .unwrap();
            let want: Vec<f64> = (0..40)
                .filter(|&k| k != 3)
                .map(|k| v.values()[[k, 3]])
                .collect();
            for (a, b) in u.iter().zip(&want) {
                assert!(
                    (a - b).abs() <= 1e-12 * b.max(1e-300),
                    "{method:?}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn exact_add_one_matches_full_recomputation() {
        let (x, ctx, _) = setup(30);
        let x_new = [0.3, -0.2];
        let u = ctx.add_one_column(&x_new, ColumnMethod::Exact).unwrap();
        let full = similarity_matrix(&x.with_row_appended(&x_new).unwrap(), 8.0, 1e-10).unwrap();
        for (k, &uk) in u.iter().enumerate().take(30) {
            let want = full.values()[[k, 30]];
            assert!((uk - want).abs() < 1e-8 * want.max(1e-12));
        }
    }

    #[test]
    fn exact_partial_matches_full_recomputation() {
        let (x, ctx, _) = setup(30);
        let x_rep = [1.5, 0.7];
        let u = ctx.partial_column(7, &x_rep, ColumnMethod::Exact).unwrap();
        let full = similarity_matrix(&x.with_row_replaced(7, &x_rep).unwrap(), 8.0, 1e-10).unwrap();
        let want: Vec<f64> = (0..30)
            .filter(|&k| k != 7)
            .map(|k| full.values()[[k, 7]])
            .collect();
        for (a, b) in u.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8 * b.max(1e-12));
        }
    }

    #[test]
    fn partial_normalizer_excludes_the_free_point() {
        let (_, ctx, _) = setup(20);
        let p = ctx
            .partial_problem(4, &[0.0, 0.0], ColumnMethod::Approx2)
            .unwrap();
        let direct = super::super::problem::frozen_normalizer(p.frozen());
        assert!((p.z_frozen() - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn out_of_range_index() {
        let (_, ctx, _) = setup(20);
        assert!(ctx
            .partial_problem(20, &[0.0, 0.0], ColumnMethod::Exact)
            .is_err());
    }
}
