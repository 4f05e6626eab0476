use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::data::{pairwise_sq_distances, InputMatrix};
use crate::error::{Error, Result};

const MAX_BRACKET_STEPS: usize = 64;
const MAX_REFINE_STEPS: usize = 200;

/// Per-row bandwidth of the Gaussian input kernel, stored as the precision
/// `beta = 1 / (2 sigma^2)` together with the row's log normalizer
/// `log sum_{k != i} exp(-beta d_ik)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowBandwidth {
    pub beta: f64,
    pub log_norm: f64,
}

impl RowBandwidth {
    pub fn sigma(&self) -> f64 {
        (0.5 / self.beta).sqrt()
    }

    /// Unnormalized-then-normalized conditional probability for squared distance `d`.
    #[inline]
    pub fn prob(&self, d: f64) -> f64 {
        (-self.beta * d - self.log_norm).exp()
    }
}

/// Output of [`calibrate_bandwidths`].
#[derive(Debug, Clone)]
pub struct Calibration {
    pub bandwidths: Vec<RowBandwidth>,
    /// Row-stochastic conditional probabilities `p_{j|i}` with zero diagonal.
    pub conditional: Array2<f64>,
}

struct Moments {
    entropy: f64,
    variance: f64,
    log_sum: f64,
}

fn moments<I: Iterator<Item = f64>>(others: I, dmin: f64, beta: f64) -> Moments {
    let (mut s, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for d in others {
        let x = d - dmin;
        let e = (-beta * x).exp();
        s += e;
        m1 += e * x;
        m2 += e * x * x;
    }
    m1 /= s;
    m2 /= s;
    Moments {
        entropy: s.ln() + beta * m1,
        variance: (m2 - m1 * m1).max(0.0),
        log_sum: s.ln(),
    }
}

/// Finds the precision of one row so that the base-2 entropy of the
/// conditional distribution equals `log2(perplexity)` within `tol`.
///
/// `row` holds squared distances; entry `skip` (the point itself) is ignored.
/// Rows whose entropy does not depend on the bandwidth (all neighbours
/// equidistant) are accepted as uniform. Returns a reason string on failure.
pub fn calibrate_row(
    row: &[f64],
    skip: Option<usize>,
    perplexity: f64,
    tol: f64,
    guess: Option<f64>,
) -> std::result::Result<RowBandwidth, String> {
    calibrate_with(
        || {
            row.iter()
                .enumerate()
                .filter(move |(j, _)| Some(*j) != skip)
                .map(|(_, &d)| d)
        },
        perplexity,
        tol,
        guess,
    )
}

/// [`calibrate_row`] over any re-iterable sequence of neighbour distances.
pub(crate) fn calibrate_with<F, I>(
    others: F,
    perplexity: f64,
    tol: f64,
    guess: Option<f64>,
) -> std::result::Result<RowBandwidth, String>
where
    F: Fn() -> I,
    I: Iterator<Item = f64>,
{
    let (dmin, dmax, sum, count) = others().fold(
        (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize),
        |(lo, hi, s, c), d| (lo.min(d), hi.max(d), s + d, c + 1),
    );
    if count == 0 {
        return Err("row has no neighbours".into());
    }
    if !(dmin >= 0.0) || !dmax.is_finite() {
        return Err("distances must be finite and non-negative".into());
    }
    if dmax == 0.0 {
        return Err("all distances are zero (duplicate-only row)".into());
    }
    let finish = |beta: f64, m: &Moments| RowBandwidth {
        beta,
        log_norm: m.log_sum - beta * dmin,
    };
    if dmax == dmin {
        let beta = 1.0 / dmax;
        return Ok(finish(beta, &moments(others(), dmin, beta)));
    }

    let target = perplexity.ln();
    let tol_nats = tol * std::f64::consts::LN_2;
    let mean_gap = sum / count as f64 - dmin;
    let mut beta = guess
        .filter(|b| b.is_finite() && *b > 0.0)
        .unwrap_or(1.0 / mean_gap);

    let mut m = moments(others(), dmin, beta);
    if (m.entropy - target).abs() < tol_nats {
        return Ok(finish(beta, &m));
    }
    // Entropy decreases in beta: too high means the kernel is too wide.
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut steps = 0;
    loop {
        if m.entropy > target {
            lo = beta;
            if hi.is_finite() {
                break;
            }
            beta *= 2.0;
        } else {
            hi = beta;
            if lo > 0.0 {
                break;
            }
            beta /= 2.0;
        }
        steps += 1;
        if steps > MAX_BRACKET_STEPS {
            return Err(format!(
                "could not bracket perplexity {perplexity} within {MAX_BRACKET_STEPS} doublings"
            ));
        }
        m = moments(others(), dmin, beta);
        if (m.entropy - target).abs() < tol_nats {
            return Ok(finish(beta, &m));
        }
    }

    for _ in 0..MAX_REFINE_STEPS {
        let slope = -beta * m.variance;
        let newton = if slope < 0.0 {
            beta - (m.entropy - target) / slope
        } else {
            f64::NAN
        };
        beta = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        m = moments(others(), dmin, beta);
        let err = m.entropy - target;
        if err.abs() < tol_nats {
            return Ok(finish(beta, &m));
        }
        if err > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(finish(beta, &m));
        }
    }
    Err(format!(
        "bandwidth search did not converge for perplexity {perplexity}"
    ))
}

fn check_perplexity(perplexity: f64, n: usize) -> Result<()> {
    if !(perplexity > 1.0 && perplexity < n as f64) {
        return Err(Error::invalid(format!(
            "perplexity {perplexity} must lie strictly between 1 and n = {n}"
        )));
    }
    Ok(())
}

fn check_distances(d: &ArrayView2<'_, f64>) -> Result<()> {
    let n = d.nrows();
    if d.ncols() != n {
        return Err(Error::invalid("distance matrix must be square"));
    }
    for i in 0..n {
        if d[[i, i]] != 0.0 {
            return Err(Error::invalid(format!(
                "distance matrix has non-zero diagonal at {i}"
            )));
        }
        for j in 0..i {
            let (a, b) = (d[[i, j]], d[[j, i]]);
            if !(a >= 0.0) || a != b {
                return Err(Error::invalid(format!(
                    "distance matrix is not symmetric and non-negative at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Calibrates every row of a squared-distance matrix (rows in parallel).
pub fn calibrate_bandwidths(d: &Array2<f64>, perplexity: f64, tol: f64) -> Result<Calibration> {
    check_distances(&d.view())?;
    check_perplexity(perplexity, d.nrows())?;
    let bandwidths = calibrate_rows(d, perplexity, tol, None)?;
    let mut conditional = d.clone();
    fill_conditional(&mut conditional, &bandwidths);
    Ok(Calibration {
        bandwidths,
        conditional,
    })
}

pub(crate) fn calibrate_rows(
    d: &Array2<f64>,
    perplexity: f64,
    tol: f64,
    guesses: Option<&[f64]>,
) -> Result<Vec<RowBandwidth>> {
    let n = d.nrows();
    let flat = d.as_standard_layout();
    let flat = flat.as_slice().expect("standard layout");
    (0..n)
        .into_par_iter()
        .map(|i| {
            let guess = guesses.and_then(|g| g.get(i).copied());
            calibrate_row(&flat[i * n..(i + 1) * n], Some(i), perplexity, tol, guess)
                .map_err(|reason| Error::Calibration { row: i, reason })
        })
        .collect()
}

/// Overwrites squared distances with `p_{j|i}` row by row.
fn fill_conditional(d: &mut Array2<f64>, bandwidths: &[RowBandwidth]) {
    let n = d.nrows();
    d.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            let bw = bandwidths[i];
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j { 0.0 } else { bw.prob(*v) };
            }
        });
}

/// Symmetric, globally normalized input affinities
/// `v_ij = (p_{j|i} + p_{i|j}) / (2n)`.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    values: Array2<f64>,
    perplexity: Option<f64>,
    bandwidths: Option<Vec<RowBandwidth>>,
}

impl SimilarityMatrix {
    /// Wraps externally computed affinities (checked for symmetry, a zero
    /// diagonal and non-negativity; not renormalized).
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let n = values.nrows();
        if n < 2 || values.ncols() != n {
            return Err(Error::invalid(
                "similarity matrix must be square with n >= 2",
            ));
        }
        for i in 0..n {
            if values[[i, i]] != 0.0 {
                return Err(Error::invalid(format!("non-zero diagonal at {i}")));
            }
            for j in 0..i {
                let (a, b) = (values[[i, j]], values[[j, i]]);
                if !(a >= 0.0) || !a.is_finite() || a != b {
                    return Err(Error::invalid(format!(
                        "entries ({i}, {j}) and ({j}, {i}) must be equal, finite and non-negative"
                    )));
                }
            }
        }
        Ok(Self {
            values,
            perplexity: None,
            bandwidths: None,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn perplexity(&self) -> Option<f64> {
        self.perplexity
    }

    pub fn bandwidths(&self) -> Option<&[RowBandwidth]> {
        self.bandwidths.as_deref()
    }

    pub fn sigmas(&self) -> Option<Vec<f64>> {
        self.bandwidths
            .as_ref()
            .map(|b| b.iter().map(RowBandwidth::sigma).collect())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        crate::data::write_matrix(&mut w, &self.values, None, false)?;
        w.flush()?;
        Ok(())
    }
}

/// Builds t-SNE affinities from squared distances.
pub fn similarity_from_distances(
    d: Array2<f64>,
    perplexity: f64,
    tol: f64,
) -> Result<SimilarityMatrix> {
    similarity_from_distances_guided(d, perplexity, tol, None)
}

pub(crate) fn similarity_from_distances_guided(
    mut d: Array2<f64>,
    perplexity: f64,
    tol: f64,
    guesses: Option<&[f64]>,
) -> Result<SimilarityMatrix> {
    check_perplexity(perplexity, d.nrows())?;
    let bandwidths = calibrate_rows(&d, perplexity, tol, guesses)?;
    fill_conditional(&mut d, &bandwidths);
    let n = d.nrows();
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (d[[i, j]] + d[[j, i]]) * scale;
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    Ok(SimilarityMatrix {
        values: d,
        perplexity: Some(perplexity),
        bandwidths: Some(bandwidths),
    })
}

/// t-SNE affinities of the rows of `x` at the given perplexity.
pub fn similarity_matrix(x: &InputMatrix, perplexity: f64, tol: f64) -> Result<SimilarityMatrix> {
    if x.nrows() < 2 {
        return Err(Error::invalid("at least two points are needed"));
    }
    similarity_from_distances(pairwise_sq_distances(x.values()), perplexity, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn entropy_bits(p: &[f64]) -> f64 {
        -p.iter()
            .filter(|&&v| v > 0.0)
            .map(|v| v * v.log2())
            .sum::<f64>()
    }

    #[test]
    fn equidistant_rows_are_uniform() {
        let d = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        for p in [1.3, 2.0] {
            let c = calibrate_bandwidths(&d, p, 1e-5).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 0.0 } else { 0.5 };
                    assert!((c.conditional[[i, j]] - want).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn hits_target_entropy() {
        let d = array![[0.0, 1.0, 100.0], [1.0, 0.0, 81.0], [100.0, 81.0, 0.0]];
        let c = calibrate_bandwidths(&d, 1.5, 1e-8).unwrap();
        for i in 0..3 {
            let row: Vec<f64> = c.conditional.row(i).to_vec();
            assert!((entropy_bits(&row) - 1.5f64.log2()).abs() < 1e-8);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_points() {
        let x = InputMatrix::new(array![[0.0], [3.0]]).unwrap();
        let v = similarity_matrix(&x, 1.5, 1e-5).unwrap();
        assert_eq!(v.values()[[0, 1]], 0.5);
        assert_eq!(v.values()[[1, 0]], 0.5);
    }

    #[test]
    fn all_zero_row_is_an_error() {
        let d = Array2::zeros((3, 3));
        match calibrate_bandwidths(&d, 1.5, 1e-5) {
            Err(Error::Calibration { row: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicates_are_calibrated_on_the_full_row() {
        let x = InputMatrix::new(array![[0.0], [0.0], [1.0], [2.5], [4.0]]).unwrap();
        let v = similarity_matrix(&x, 2.5, 1e-6).unwrap();
        assert!(v.values().iter().all(|x| x.is_finite()));
        assert!((v.values().sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_perplexity_is_rejected() {
        let d = array![[0.0, 1.0], [1.0, 0.0]];
        assert!(calibrate_bandwidths(&d, 2.0, 1e-5).is_err());
    }

    #[test]
    fn warm_guess_gives_same_answer() {
        let row = [0.0, 0.3, 1.7, 2.2, 5.0, 9.0, 0.9];
        let a = calibrate_row(&row, Some(0), 3.0, 1e-10, None).unwrap();
        let b = calibrate_row(&row, Some(0), 3.0, 1e-10, Some(a.beta * 1.01)).unwrap();
        assert!((a.beta - b.beta).abs() < 1e-6 * a.beta);
    }
}
