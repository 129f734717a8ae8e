//! Numeric CSV tables: comma separated, header row required, `.` decimals.
//! Categorical covariates must already be encoded as numbers.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{QuinnError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub values: Array2<f64>,
}

fn io_err(path: &Path, source: std::io::Error) -> QuinnError {
    QuinnError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> QuinnError {
    QuinnError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        Self::from_reader(file, path)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, path: &Path) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| format_err(path, e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if names.is_empty() || names.iter().all(String::is_empty) {
            return Err(format_err(path, "missing header row"));
        }
        let mut flat = Vec::new();
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
            if rec.len() != names.len() {
                return Err(format_err(
                    path,
                    format!("data row {i} has {} fields, header has {}", rec.len(), names.len()),
                ));
            }
            for (field, name) in rec.iter().zip(&names) {
                let v: f64 = field.trim().parse().map_err(|_| {
                    QuinnError::data(format!(
                        "{}: data row {i}, column `{name}`: `{field}` is not a number \
                         (categorical covariates must be encoded numerically)",
                        path.display()
                    ))
                })?;
                if !v.is_finite() {
                    return Err(QuinnError::data(format!(
                        "{}: data row {i}, column `{name}` is not finite",
                        path.display()
                    )));
                }
                flat.push(v);
            }
            rows += 1;
        }
        let values = Array2::from_shape_vec((rows, names.len()), flat).expect("rectangular");
        Ok(Table { names, values })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| {
            QuinnError::data(format!(
                "no column named `{name}` (columns: {})",
                self.names.join(", ")
            ))
        })
    }

    /// Split into covariates (all other columns, in order) and the response.
    pub fn split_response(&self, response: &str) -> Result<(Array2<f64>, Array1<f64>, Vec<String>)> {
        let r = self.column_index(response)?;
        let keep: Vec<usize> = (0..self.names.len()).filter(|&c| c != r).collect();
        if keep.is_empty() {
            return Err(QuinnError::data("no covariate columns besides the response"));
        }
        let x = self.values.select(ndarray::Axis(1), &keep);
        let y = self.values.column(r).to_owned();
        let names = keep.iter().map(|&c| self.names[c].clone()).collect();
        Ok((x, y, names))
    }

    /// Columns reordered to match `names`.
    pub fn select(&self, names: &[String]) -> Result<Array2<f64>> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.values.select(ndarray::Axis(1), &idx))
    }
}

/// Shortest-exact float text: 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a numeric table with the given header.
pub fn write_table(path: &Path, names: &[String], values: ArrayView2<f64>) -> Result<()> {
    if names.len() != values.ncols() {
        return Err(QuinnError::shape(format!(
            "{} column names for {} columns",
            names.len(),
            values.ncols()
        )));
    }
    let mut out = String::with_capacity(values.len() * 24);
    out.push_str(&names.join(","));
    out.push('\n');
    for row in values.rows() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}
