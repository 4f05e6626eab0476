use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::InputMatrix;
use crate::error::{Error, Result};

/// Layout flags for numeric CSV files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// First line is a header and is skipped on load (written as `x0,x1,..` on save).
    pub header: bool,
    /// Last column holds integer labels.
    pub labels: bool,
}

/// Reads a comma-separated numeric table.
pub fn load_csv(path: impl AsRef<Path>, opts: CsvOptions) -> Result<InputMatrix> {
    let file = File::open(path.as_ref())?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let first_line = usize::from(opts.header);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = r + first_line;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Parse {
                    row,
                    column: rec.len().min(w),
                    message: format!("expected {w} fields, found {}", rec.len()),
                })
            }
            _ => {}
        }
        let numeric = if opts.labels {
            rec.len() - 1
        } else {
            rec.len()
        };
        for (c, field) in rec.iter().enumerate().take(numeric) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column: c,
                message: format!("not a number: {field:?}"),
            })?;
            values.push(v);
        }
        if opts.labels {
            let field = &rec[numeric];
            let l: usize = field.parse().map_err(|_| Error::Parse {
                row,
                column: numeric,
                message: format!("not a non-negative integer label: {field:?}"),
            })?;
            labels.push(l);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0) - usize::from(opts.labels && width.is_some());
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("CSV file contains no numeric data"));
    }
    let m = InputMatrix::new(Array2::from_shape_vec((rows, cols), values).expect("rectangular"))?;
    if opts.labels {
        m.with_labels(labels)
    } else {
        Ok(m)
    }
}

/// Writes the matrix with shortest round-trip float formatting.
pub fn save_csv(m: &InputMatrix, path: impl AsRef<Path>, opts: CsvOptions) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_matrix(
        &mut w,
        m.values(),
        if opts.labels { m.labels() } else { None },
        opts.header,
    )?;
    w.flush()?;
    Ok(())
}

pub(crate) fn write_matrix(
    w: &mut impl Write,
    values: &Array2<f64>,
    labels: Option<&[usize]>,
    header: bool,
) -> Result<()> {
    if header {
        let mut names: Vec<String> = (0..values.ncols()).map(|j| format!("x{j}")).collect();
        if labels.is_some() {
            names.push("label".into());
        }
        writeln!(w, "{}", names.join(","))?;
    }
    for (i, row) in values.rows().into_iter().enumerate() {
        let mut line = row
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(",");
        if let Some(l) = labels {
            line.push_str(&format!(",{}", l[i]));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
