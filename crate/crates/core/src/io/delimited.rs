//! Plain-text feature and label files.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::fmx::FormatError;
use super::manifest::write_atomic;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Reads a rectangular numeric CSV. A first line containing any non-numeric
/// field is taken to be a header and skipped.
pub fn read_csv_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let mut cols = None;
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<_> = record.iter().map(str::parse::<f64>).collect();
        if i == 0 && parsed.iter().any(|p| p.is_err()) {
            continue;
        }
        let expected = *cols.get_or_insert(record.len());
        if record.len() != expected {
            return Err(FormatError::Ragged {
                line,
                expected,
                got: record.len(),
            }
            .into());
        }
        for (col, (value, field)) in parsed.into_iter().zip(record.iter()).enumerate() {
            match value {
                Ok(v) if v.is_finite() => data.push(v),
                _ => {
                    return Err(FormatError::NotNumeric {
                        line,
                        col: col + 1,
                        value: field.to_string(),
                    }
                    .into())
                }
            }
        }
        rows += 1;
    }
    let Some(cols) = cols else {
        return Err(FormatError::Empty.into());
    };
    FeatureMatrix::new(rows, cols, data)
}

fn csv_error(path: &Path, e: ::csv::Error) -> Error {
    match e.into_kind() {
        ::csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{other:?}")),
        ),
    }
}

/// Writes values with shortest round-trip formatting, so reading back is exact.
pub fn write_csv_features(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    write_atomic(path.as_ref(), |w| {
        for row in m.row_iter() {
            let mut first = true;
            for v in row {
                if !first {
                    w.write_all(b",")?;
                }
                first = false;
                write!(w, "{v}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Reads class labels, one non-negative integer per line. Blank lines are skipped.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let label = t.parse::<usize>().map_err(|_| FormatError::BadLabel {
            line: i as u64 + 1,
            value: t.to_string(),
        })?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(FormatError::Empty.into());
    }
    Ok(labels)
}
