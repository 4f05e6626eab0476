use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{stream_rng, InputMatrix};
use crate::error::{Error, Result};

/// Points `(t cos t, t sin t, z)` with `t ~ U[angle]` and `z ~ U[height]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwissRollSpec {
    pub n: usize,
    pub angle: [f64; 2],
    pub height: [f64; 2],
    #[serde(default)]
    pub seed: u64,
    /// Number of equal-width angle bins used for the integer labels.
    #[serde(default = "default_bins")]
    pub label_bins: usize,
}

fn default_bins() -> usize {
    10
}

impl SwissRollSpec {
    pub fn new(n: usize, angle: [f64; 2], height: [f64; 2], seed: u64) -> Self {
        Self {
            n,
            angle,
            height,
            seed,
            label_bins: default_bins(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("swiss roll needs at least one point"));
        }
        let [a, b] = self.angle;
        let [c, d] = self.height;
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(Error::invalid("swiss roll ranges must be finite"));
        }
        // Degenerate (a == b) ranges are allowed and pin the parameter.
        if b < a || d < c {
            return Err(Error::invalid(format!(
                "empty range: angle [{a}, {b}], height [{c}, {d}]"
            )));
        }
        if self.label_bins == 0 {
            return Err(Error::invalid("label_bins must be positive"));
        }
        Ok(())
    }
}

/// Samples the roll. Angles use stream 0 and heights stream 1 of the seed.
/// Labels are the angle quantized into `label_bins` bins; the raw angle is
/// kept as the continuous row parameter.
pub fn sample_swiss_roll(spec: &SwissRollSpec) -> Result<InputMatrix> {
    spec.validate()?;
    let [a, b] = spec.angle;
    let [c, d] = spec.height;
    let mut angle_rng = stream_rng(spec.seed, 0);
    let mut height_rng = stream_rng(spec.seed, 1);
    let mut values = Array2::zeros((spec.n, 3));
    let mut ts = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let t = a + (b - a) * angle_rng.random::<f64>();
        let z = c + (d - c) * height_rng.random::<f64>();
        values[[i, 0]] = t * t.cos();
        values[[i, 1]] = t * t.sin();
        values[[i, 2]] = z;
        ts.push(t);
    }
    let bins = spec.label_bins;
    let labels = ts
        .iter()
        .map(|&t| {
            if b > a {
                (((t - a) / (b - a) * bins as f64) as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect();
    InputMatrix::new(values)?
        .with_labels(labels)?
        .with_param(ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn fixed_parameter_point() {
        let x = sample_swiss_roll(&SwissRollSpec::new(1, [PI, PI], [0.0, 0.0], 5)).unwrap();
        let r = x.row(0);
        assert!((r[0] + PI).abs() < 1e-12);
        assert!(r[1].abs() < 1e-12);
        assert_eq!(r[2], 0.0);
    }

    #[test]
    fn rows_lie_on_the_spiral() {
        let spec = SwissRollSpec::new(800, [1.5 * PI, 4.5 * PI], [0.0, 10.0], 9);
        let x = sample_swiss_roll(&spec).unwrap();
        let t = x.param().unwrap();
        for (i, row) in x.values().rows().into_iter().enumerate() {
            let r2 = row[0] * row[0] + row[1] * row[1];
            assert!((r2 - t[i] * t[i]).abs() <= 1e-9 * t[i] * t[i]);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = SwissRollSpec::new(50, [1.0, 10.0], [0.0, 5.0], 77);
        let a = sample_swiss_roll(&spec).unwrap();
        let b = sample_swiss_roll(&spec).unwrap();
        assert_eq!(a.values().as_slice(), b.values().as_slice());
    }

    #[test]
    fn rejects_reversed_range() {
        let spec = SwissRollSpec::new(5, [3.0, 1.0], [0.0, 1.0], 0);
        assert!(sample_swiss_roll(&spec).is_err());
    }
}
