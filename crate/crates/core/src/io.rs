//! Matrix files, convergence traces and run manifests.
//!
//! Two matrix formats are supported:
//!
//! * CSV: one observation per line, optional header line (a first line with
//!   no numeric cell). Values are written in Rust's shortest round-trip
//!   representation, so CSV round trips are exact.
//! * Binary: the 8 magic bytes `SPCAMAT1`, rows as u64 little-endian, cols
//!   as u64 little-endian, then `rows * cols` f64 little-endian values in
//!   column-major order.
//!
//! [`read_matrix`] detects the format from the magic bytes; [`write_matrix`]
//! picks binary for a `.bin` extension and CSV otherwise.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpcaError};
use crate::matrix::DenseMatrix;
use crate::solver::{SolverConfig, SpcaResult, Termination};

pub const BINARY_MAGIC: &[u8; 8] = b"SPCAMAT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("bin") => MatrixFormat::Binary,
            _ => MatrixFormat::Csv,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Binary => "bin",
        }
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let mut bytes = Vec::new();
    File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    if bytes.is_empty() {
        return Err(SpcaError::Format(format!(
            "{} is empty",
            path.as_ref().display()
        )));
    }
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(&bytes)
    } else {
        parse_csv(&bytes)
    }
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    write_matrix_as(path, m, MatrixFormat::for_path(path))
}

pub fn write_matrix_as(
    path: impl AsRef<Path>,
    m: &DenseMatrix,
    format: MatrixFormat,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        MatrixFormat::Binary => out.write_all(&encode_binary(m))?,
        MatrixFormat::Csv => {
            let mut w = csv::WriterBuilder::new().from_writer(&mut out);
            for row in m.as_array().rows() {
                w.write_record(row.iter().map(|v| v.to_string()))
                    .map_err(csv_error)?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn encode_binary(m: &DenseMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(24 + 8 * m.rows() * m.cols());
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.to_column_major() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_binary(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < 24 || !bytes.starts_with(BINARY_MAGIC) {
        return Err(SpcaError::Format(
            "binary matrix header is missing or truncated".into(),
        ));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (word(8) as usize, word(16) as usize);
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| SpcaError::Format(format!("implausible shape {rows}x{cols}")))?;
    let body = &bytes[24..];
    let available = body.len() / 8;
    if available < count {
        // entries are column-major: the first missing one is entry `available`
        let (row, col) = (available % rows.max(1), available / rows.max(1));
        return Err(SpcaError::Parse {
            row: row + 1,
            col: col + 1,
            message: format!("binary data truncated: {available} of {count} values present"),
        });
    }
    if body.len() != count * 8 {
        return Err(SpcaError::Format(format!(
            "{} trailing bytes after {rows}x{cols} matrix",
            body.len() - count * 8
        )));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(SpcaError::Parse {
            row: pos % rows + 1,
            col: pos / rows + 1,
            message: "non-finite value".into(),
        });
    }
    DenseMatrix::from_column_major(rows, cols, data)
}

fn csv_error(e: csv::Error) -> SpcaError {
    SpcaError::Format(e.to_string())
}

/// Parses CSV text. Errors carry 1-based line and column numbers.
pub fn parse_csv(bytes: &[u8]) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = idx + 1;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if idx == 0 && record.iter().all(|cell| cell.parse::<f64>().is_err()) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| SpcaError::Parse {
                row: line,
                col: c + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(SpcaError::Parse {
                    row: line,
                    col: c + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(SpcaError::Parse {
                    row: line,
                    col: row.len().min(w) + 1,
                    message: format!("expected {w} columns, found {}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SpcaError::Format("no numeric rows found".into()));
    }
    DenseMatrix::from_rows(&rows)
}

/// Reads a group partition: one group per nonempty line, 1-based row indices
/// separated by commas or whitespace. Returned indices are zero-based.
pub fn read_groups(path: impl AsRef<Path>) -> Result<Vec<Vec<usize>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut groups = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut group = Vec::new();
        for (c, tok) in line
            .split(|ch: char| ch == ',' || ch.is_whitespace())
            .filter(|t| !t.is_empty())
            .enumerate()
        {
            let idx: usize = tok.parse().map_err(|_| SpcaError::Parse {
                row: i + 1,
                col: c + 1,
                message: format!("not a row index: {tok:?}"),
            })?;
            if idx == 0 {
                return Err(SpcaError::Parse {
                    row: i + 1,
                    col: c + 1,
                    message: "row indices are 1-based".into(),
                });
            }
            group.push(idx - 1);
        }
        groups.push(group);
    }
    Ok(groups)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub stationarity: f64,
}

pub fn trace_records(result: &SpcaResult) -> Vec<TraceRecord> {
    result
        .objective_trace
        .iter()
        .zip(&result.stationarity_trace)
        .enumerate()
        .map(|(i, (&objective, &stationarity))| TraceRecord {
            iteration: i + 1,
            objective,
            stationarity,
        })
        .collect()
}

/// One JSON object per line.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub sketch_secs: f64,
    pub iterations_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Deterministic,
    Randomized,
    Robust,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaSource {
    User,
    MadDefault,
}

/// Record of one `solve` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub input: String,
    pub shape: (usize, usize),
    pub solver: SolverKind,
    pub config: SolverConfig,
    pub outputs: BTreeMap<String, String>,
    pub timings: PhaseTimings,
    /// `"converged"` or `"max_iter"`.
    pub termination: String,
    pub criterion: Termination,
    pub iterations: usize,
    pub step_size: f64,
    pub initial_objective: f64,
    /// Objective of the emitted factors on the (centered) input matrix.
    pub final_objective: f64,
    pub final_stationarity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub huber_kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_source: Option<KappaSource>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_header_and_error_location() {
        let m = parse_csv(b"a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m.get(1, 0), 3.0);

        let err = parse_csv(b"1,2,3\n4,5,6\n7,x,9\n").unwrap_err();
        match err {
            SpcaError::Parse { row, col, .. } => assert_eq!((row, col), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_ragged_rows_are_rejected() {
        let err = parse_csv(b"1,2\n3\n").unwrap_err();
        assert!(matches!(err, SpcaError::Parse { row: 2, .. }));
    }

    #[test]
    fn csv_rejects_non_finite() {
        assert!(parse_csv(b"1,nan\n").is_err());
        assert!(parse_csv(b"1,inf\n").is_err());
    }

    #[test]
    fn binary_truncation_reports_location() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let bytes = encode_binary(&m);
        let cut = &bytes[..bytes.len() - 8];
        match decode_binary(cut).unwrap_err() {
            SpcaError::Parse { row, col, .. } => assert_eq!((row, col), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(decode_binary(&bytes[..10]).is_err());
    }

    #[test]
    fn binary_layout_is_column_major() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let bytes = encode_binary(&m);
        assert_eq!(&bytes[..8], BINARY_MAGIC);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), 2.0);
    }
}
