//! CSV ingestion and emission for matrices, vectors, and chains.
//!
//! Input files are plain numeric CSV. A header row is detected rather
//! than declared: when any field of the first row fails to parse as a
//! number, that row is treated as a header and skipped; every later
//! defect is an error citing its 1-based line. `--transpose` reads a
//! design matrix stored column-major (`k` rows of `n` values).
//!
//! All numeric output uses the shortest representation that parses back
//! to exactly the same `f64` (the standard library's `Display`), so
//! written files are byte-deterministic and round-trip losslessly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{io_err, CliError, Result};

/// Reads an `n x k` numeric CSV into a matrix. With `transpose` the file
/// holds the transposed (`k x n`) layout and is flipped after reading.
pub fn read_matrix(path: &Path, transpose: bool) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut cols = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line());
        let mut row = Vec::with_capacity(record.len());
        let mut bad: Option<(usize, String)> = None;
        for (j, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) => row.push(v),
                Err(_) => {
                    bad = Some((j, field.to_string()));
                    break;
                }
            }
        }
        match bad {
            None => {
                cols = row.len();
                rows.push(row);
            }
            // A non-numeric first row is a header; anywhere else it is a
            // defect.
            Some((j, field)) if idx > 0 => {
                return Err(CliError::Parse {
                    path: path.display().to_string(),
                    line,
                    msg: format!("field {} {field:?} is not a number", j + 1),
                });
            }
            Some(_) => {}
        }
    }
    if rows.is_empty() {
        return Err(CliError::Parse {
            path: path.display().to_string(),
            line: None,
            msg: "no data rows".into(),
        });
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let m = DMatrix::from_row_slice(rows.len(), cols, &flat);
    Ok(if transpose { m.transpose() } else { m })
}

/// Reads a single-column numeric CSV into a vector.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path, false)?;
    if m.ncols() != 1 {
        return Err(CliError::Parse {
            path: path.display().to_string(),
            line: None,
            msg: format!("expected a single column, found {}", m.ncols()),
        });
    }
    Ok(DVector::from_column_slice(m.column(0).as_slice()))
}

/// Writes a matrix as headerless numeric CSV, one row per line.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for i in 0..m.nrows() {
        write_row(&mut out, (0..m.ncols()).map(|j| m[(i, j)])).map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Writes a vector as a headerless single-column CSV.
pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for i in 0..v.len() {
        writeln!(out, "{}", v[i]).map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Writes scale and coefficient draws side by side, one draw per row,
/// under the header `sigma1,sigma2,beta_1,...,beta_k`.
pub fn write_chain(path: &Path, sigma: &DMatrix<f64>, beta: &DMatrix<f64>) -> Result<()> {
    debug_assert_eq!(sigma.nrows(), beta.nrows());
    debug_assert_eq!(sigma.ncols(), 2);
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let labels: Vec<String> = (1..=beta.ncols()).map(|i| format!("beta_{i}")).collect();
    writeln!(out, "sigma1,sigma2,{}", labels.join(",")).map_err(|e| io_err(path, e))?;
    for d in 0..sigma.nrows() {
        let scales = [sigma[(d, 0)], sigma[(d, 1)]];
        let row = scales.into_iter().chain((0..beta.ncols()).map(|j| beta[(d, j)]));
        write_row(&mut out, row).map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

fn write_row<W: Write>(out: &mut W, values: impl Iterator<Item = f64>) -> std::io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            write!(out, ",")?;
        }
        write!(out, "{v}")?;
        first = false;
    }
    writeln!(out)
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line());
    let msg = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        _ => e.to_string(),
    };
    CliError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    }
}
