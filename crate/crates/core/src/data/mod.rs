//! Input data: the feature matrix type, synthetic generators, PCA and CSV I/O.

mod csv_io;
mod gmm;
mod pca;
pub mod presets;
mod rng;
mod swiss_roll;

pub(crate) use csv_io::write_matrix;
pub use csv_io::{load_csv, save_csv, CsvOptions};
pub use gmm::{sample_gmm, GmmComponent, GmmSpec};
pub use pca::{pca_project, PcaProjection};
pub use rng::{stream_rng, StreamRng};
pub use swiss_roll::{sample_swiss_roll, SwissRollSpec};

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// An `n x d` feature matrix with optional per-row annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    values: Array2<f64>,
    labels: Option<Vec<usize>>,
    /// Continuous per-row parameter (the spiral angle for Swiss rolls).
    param: Option<Vec<f64>>,
}

impl InputMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::invalid(format!(
                "matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let d = values.ncols();
            return Err(Error::invalid(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self {
            values,
            labels: None,
            param: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.nrows() {
            return Err(Error::invalid(format!(
                "{} labels for {} rows",
                labels.len(),
                self.nrows()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_param(mut self, param: Vec<f64>) -> Result<Self> {
        if param.len() != self.nrows() {
            return Err(Error::invalid(format!(
                "{} parameter values for {} rows",
                param.len(),
                self.nrows()
            )));
        }
        self.param = Some(param);
        Ok(self)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn param(&self) -> Option<&[f64]> {
        self.param.as_deref()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Copy of the matrix with row `i` replaced by `x`.
    pub fn with_row_replaced(&self, i: usize, x: &[f64]) -> Result<Self> {
        if i >= self.nrows() {
            return Err(Error::invalid(format!(
                "row index {i} out of range for {} rows",
                self.nrows()
            )));
        }
        if x.len() != self.ncols() {
            return Err(Error::invalid(format!(
                "replacement has dimension {}, expected {}",
                x.len(),
                self.ncols()
            )));
        }
        let mut out = self.clone();
        out.values
            .row_mut(i)
            .iter_mut()
            .zip(x)
            .for_each(|(a, b)| *a = *b);
        Ok(out)
    }

    /// Copy of the matrix with `x` appended as a new last row (annotations dropped).
    pub fn with_row_appended(&self, x: &[f64]) -> Result<Self> {
        if x.len() != self.ncols() {
            return Err(Error::invalid(format!(
                "appended row has dimension {}, expected {}",
                x.len(),
                self.ncols()
            )));
        }
        let mut values = self.values.clone();
        values
            .push_row(ArrayView1::from(x))
            .map_err(|e| Error::invalid(e.to_string()))?;
        InputMatrix::new(values)
    }
}

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dense `n x n` matrix of squared Euclidean distances between rows.
pub fn pairwise_sq_distances(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sq_dist(&rows[i], &rows[j]);
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Largest Euclidean distance between two rows (0 for fewer than two rows).
pub fn diameter(x: &Array2<f64>) -> f64 {
    let rows: Vec<&[f64]> = x
        .rows()
        .into_iter()
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();
    let mut best = 0.0f64;
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            best = best.max(sq_dist(rows[i], rows[j]));
        }
    }
    best.sqrt()
}

/// Diagonal of the bounding box of the rows (a scale for tolerances).
pub fn bbox_diameter(x: &Array2<f64>) -> f64 {
    let mut s = 0.0;
    for col in x.columns() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        s += (hi - lo) * (hi - lo);
    }
    s.sqrt()
}
