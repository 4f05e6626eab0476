use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named scalar metrics and per-point vectors, with the parameters used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub scalars: BTreeMap<String, f64>,
    pub vectors: BTreeMap<String, Vec<f64>>,
    pub params: serde_json::Value,
}

impl MetricReport {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ..Default::default()
        }
    }

    pub fn scalar(&mut self, name: &str, value: f64) {
        self.scalars.insert(name.to_owned(), value);
    }

    pub fn vector(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n {
            return Err(Error::invalid(format!(
                "{name} has {} entries, expected {}",
                values.len(),
                self.n
            )));
        }
        self.vectors.insert(name.to_owned(), values);
        Ok(())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Per-point vectors as columns after an `index` column.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["index".to_owned()];
        header.extend(self.vectors.keys().cloned());
        w.write_record(&header)?;
        for i in 0..self.n {
            let mut rec = vec![i.to_string()];
            rec.extend(self.vectors.values().map(|v| format!("{:?}", v[i])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Scalars as `metric, value` rows.
    pub fn save_summary_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["metric", "value"])?;
        for (k, v) in &self.scalars {
            w.write_record([k.clone(), format!("{v:?}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_length_is_checked() {
        let mut r = MetricReport::new(3);
        assert!(r.vector("a", vec![1.0, 2.0]).is_err());
        r.vector("a", vec![1.0, 2.0, 3.0]).unwrap();
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = MetricReport::new(2);
        r.vector("b", vec![0.5, 1.5]).unwrap();
        r.vector("a", vec![1.0, 2.0]).unwrap();
        r.scalar("db_index", 0.25);
        let p = dir.path().join("m.csv");
        r.save_csv(&p).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "index,a,b\n0,1.0,0.5\n1,2.0,1.5\n"
        );
        let s = dir.path().join("s.csv");
        r.save_summary_csv(&s).unwrap();
        assert_eq!(
            std::fs::read_to_string(&s).unwrap(),
            "metric,value\ndb_index,0.25\n"
        );
    }
}
