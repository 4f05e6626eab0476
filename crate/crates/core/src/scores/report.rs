use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Perturbation,
    Singularity,
}

/// Per-point diagnostic scores.
///
/// `score` is NaN for masked points and for points whose computation failed
/// (with the message in `errors`), and `+inf` for flagged singularity scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub kind: ScoreKind,
    #[serde(with = "nonfinite")]
    pub scores: Vec<f64>,
    /// Non-positive curvature (singularity) or a failed solve (perturbation).
    pub flagged: Vec<bool>,
    /// Points skipped by pre-screening.
    pub masked: Vec<bool>,
    pub errors: Vec<Option<String>>,
    /// Parameters the scores were computed with.
    pub config: serde_json::Value,
}

impl ScoreReport {
    pub fn new(kind: ScoreKind, n: usize, config: serde_json::Value) -> Self {
        Self {
            kind,
            scores: vec![f64::NAN; n],
            flagged: vec![false; n],
            masked: vec![false; n],
            errors: vec![None; n],
            config,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Indices with a finite score.
    pub fn finite_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.scores[i].is_finite())
            .collect()
    }

    /// Number of points flagged with an infinite score.
    pub fn infinite_count(&self) -> usize {
        self.scores.iter().filter(|s| s.is_infinite()).count()
    }

    /// Mean of the largest `ceil(frac * m)` of the `m` finite scores.
    pub fn top_fraction_mean(&self, frac: f64) -> Option<f64> {
        let mut finite: Vec<f64> = self
            .scores
            .iter()
            .copied()
            .filter(|s| s.is_finite())
            .collect();
        if finite.is_empty() || !(frac > 0.0 && frac <= 1.0) {
            return None;
        }
        finite.sort_by(|a, b| b.total_cmp(a));
        let k = ((frac * finite.len() as f64).ceil() as usize).max(1);
        Some(finite[..k].iter().sum::<f64>() / k as f64)
    }

    /// Indices of the largest `ceil(frac * m)` scores among the `m` non-NaN
    /// ones (infinite scores rank first), ties broken by index.
    pub fn top_fraction_indices(&self, frac: f64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len())
            .filter(|&i| !self.scores[i].is_nan())
            .collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        let k = (frac * idx.len() as f64).ceil() as usize;
        idx.truncate(k);
        idx
    }

    /// Threshold of the top `frac` finite scores (the smallest score kept).
    pub fn top_fraction_threshold(&self, frac: f64) -> Option<f64> {
        let top = self.top_fraction_indices(frac);
        top.iter()
            .map(|&i| self.scores[i])
            .filter(|s| s.is_finite())
            .reduce(f64::min)
    }

    /// CSV with columns `index, score, flag, masked`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["index", "score", "flag", "masked"])?;
        for i in 0..self.len() {
            w.write_record([
                i.to_string(),
                format!("{:?}", self.scores[i]),
                u8::from(self.flagged[i]).to_string(),
                u8::from(self.masked[i]).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let f = File::open(path)?;
        let r: Self = serde_json::from_reader(std::io::BufReader::new(f))?;
        let n = r.scores.len();
        if r.flagged.len() != n || r.masked.len() != n || r.errors.len() != n {
            return Err(Error::invalid(
                "score report columns have different lengths",
            ));
        }
        Ok(r)
    }
}

/// JSON has no NaN or infinity; those are written as strings.
mod nonfinite {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Value {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|&x| {
                if x.is_finite() {
                    Value::Num(x)
                } else if x.is_nan() {
                    Value::Text("nan".into())
                } else if x > 0.0 {
                    Value::Text("inf".into())
                } else {
                    Value::Text("-inf".into())
                }
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Value>::deserialize(d)?
            .into_iter()
            .map(|v| match v {
                Value::Num(x) => Ok(x),
                Value::Text(t) => match t.as_str() {
                    "nan" => Ok(f64::NAN),
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    other => Err(D::Error::custom(format!("unexpected score {other:?}"))),
                },
            })
            .collect()
    }
}
