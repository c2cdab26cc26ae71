//! Delimited numeric tables.

use std::path::Path;

use lamp_core::persist::write_atomic;
use lamp_core::{Design, Site};

use crate::error::{CliError, CliResult};

/// Name of the train/test flag column written by `simulate`.
pub const TEST_FLAG: &str = "is_test";

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Table> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if headers.is_empty() {
            return Err(CliError::data(format!("{}: no columns", path.display())));
        }
        let mut columns = vec![Vec::new(); headers.len()];
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                    CliError::data(format!(
                        "{}: row {}, column `{}`: `{field}` is not a finite number",
                        path.display(),
                        r + 2,
                        headers[j]
                    ))
                })?;
                columns[j].push(v);
            }
        }
        if columns[0].is_empty() {
            return Err(CliError::data(format!("{}: no data rows", path.display())));
        }
        Ok(Table { headers, columns })
    }

    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> CliResult<&[f64]> {
        self.index(name).map(|j| self.columns[j].as_slice()).ok_or_else(|| {
            CliError::data(format!("missing column `{name}` (found: {})", self.headers.join(", ")))
        })
    }

    /// Keeps only `rows`.
    pub fn select(&self, rows: &[usize]) -> Table {
        Table {
            headers: self.headers.clone(),
            columns: self.columns.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect(),
        }
    }

    /// Rows whose test flag equals `test`; all rows when there is no flag column.
    pub fn split_rows(&self, test: bool) -> Vec<usize> {
        match self.index(TEST_FLAG) {
            Some(j) => (0..self.nrows()).filter(|&i| (self.columns[j][i] != 0.0) == test).collect(),
            None => (0..self.nrows()).collect(),
        }
    }

    pub fn sites(&self, coords: &[String]) -> CliResult<Vec<Site>> {
        let cols: Vec<&[f64]> = coords.iter().map(|c| self.column(c)).collect::<CliResult<_>>()?;
        (0..self.nrows())
            .map(|i| {
                let c: Vec<f64> = cols.iter().map(|col| col[i]).collect();
                Site::new(&c).map_err(CliError::from)
            })
            .collect()
    }

    /// Every column that is not a coordinate, the target, or the test flag.
    pub fn default_covariates(&self, coords: &[String], target: &str) -> Vec<String> {
        self.headers
            .iter()
            .filter(|h| !coords.contains(h) && h.as_str() != target && h.as_str() != TEST_FLAG)
            .cloned()
            .collect()
    }

    pub fn design(&self, covariates: &[String], intercept: bool) -> CliResult<Design> {
        let cols: Vec<Vec<f64>> = covariates.iter().map(|c| self.column(c).map(<[f64]>::to_vec)).collect::<CliResult<_>>()?;
        let d = if intercept {
            Design::with_intercept(covariates, &cols, self.nrows())
        } else if cols.is_empty() {
            Design::new(Vec::new(), self.nrows(), Vec::new())
        } else {
            Design::from_columns(covariates.to_vec(), &cols)
        };
        d.map_err(CliError::from)
    }
}

/// Writes named columns as CSV, atomically.
pub fn write_columns(path: &Path, headers: &[&str], columns: &[&[f64]]) -> CliResult<()> {
    let n = columns.first().map_or(0, |c| c.len());
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(headers)?;
        let mut buf = csv::ByteRecord::new();
        for i in 0..n {
            buf.clear();
            for c in columns {
                buf.push_field(c[i].to_string().as_bytes());
            }
            out.write_byte_record(&buf)?;
        }
        out.flush()?;
        Ok(())
    })
    .map_err(CliError::from)
}

/// Writes text, atomically.
pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?)).map_err(CliError::from)
}
