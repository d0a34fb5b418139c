//! `fmx`: a minimal binary container for dense feature matrices.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FMX1"
//! 4       1     dtype: 0 = f32, 1 = f64
//! 5       8     rows, u64 little-endian
//! 13      8     cols, u64 little-endian
//! 21      ...   rows * cols values, row-major, little-endian
//! ```
//!
//! The file length must equal `21 + rows * cols * width` exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const FMX_MAGIC: [u8; 4] = *b"FMX1";
pub const FMX_HEADER_LEN: u64 = 21;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error(
        "bad magic at offset 0: expected \"FMX1\", found {:?}",
        String::from_utf8_lossy(found)
    )]
    BadMagic { found: [u8; 4] },

    #[error("unknown dtype {code} at offset 4")]
    UnknownDtype { code: u8 },

    #[error("zero dimension in header ({rows}x{cols})")]
    ZeroDimension { rows: u64, cols: u64 },

    #[error("rows * cols overflows ({rows}x{cols})")]
    Overflow { rows: u64, cols: u64 },

    #[error("truncated: expected {expected} bytes, file has {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("trailing data: expected {expected} bytes, file has {actual}")]
    TrailingBytes { expected: u64, actual: u64 },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: u64, col: u64 },

    #[error("line {line}: ragged row with {got} fields, expected {expected}")]
    Ragged { line: u64, expected: usize, got: usize },

    #[error("line {line}, column {col}: cannot parse {value:?} as a number")]
    NotNumeric { line: u64, col: usize, value: String },

    #[error("line {line}: cannot parse {value:?} as a class label")]
    BadLabel { line: u64, value: String },

    #[error("file contains no data rows")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    F64 = 1,
}

impl Dtype {
    pub fn width(self) -> u64 {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FmxHeader {
    pub dtype: Dtype,
    pub rows: u64,
    pub cols: u64,
}

impl FmxHeader {
    pub fn payload_len(&self) -> std::result::Result<u64, FormatError> {
        let overflow = FormatError::Overflow {
            rows: self.rows,
            cols: self.cols,
        };
        self.rows
            .checked_mul(self.cols)
            .and_then(|v| v.checked_mul(self.dtype.width()))
            .and_then(|v| v.checked_add(FMX_HEADER_LEN))
            .map(|total| total - FMX_HEADER_LEN)
            .ok_or(overflow)
    }

    fn encode(&self) -> [u8; FMX_HEADER_LEN as usize] {
        let mut h = [0u8; FMX_HEADER_LEN as usize];
        h[..4].copy_from_slice(&FMX_MAGIC);
        h[4] = self.dtype as u8;
        h[5..13].copy_from_slice(&self.rows.to_le_bytes());
        h[13..21].copy_from_slice(&self.cols.to_le_bytes());
        h
    }

    fn decode(h: &[u8; FMX_HEADER_LEN as usize]) -> std::result::Result<Self, FormatError> {
        let magic: [u8; 4] = h[..4].try_into().expect("4 bytes");
        if magic != FMX_MAGIC {
            return Err(FormatError::BadMagic { found: magic });
        }
        let dtype = match h[4] {
            0 => Dtype::F32,
            1 => Dtype::F64,
            code => return Err(FormatError::UnknownDtype { code }),
        };
        let rows = u64::from_le_bytes(h[5..13].try_into().expect("8 bytes"));
        let cols = u64::from_le_bytes(h[13..21].try_into().expect("8 bytes"));
        if rows == 0 || cols == 0 {
            return Err(FormatError::ZeroDimension { rows, cols });
        }
        Ok(Self { dtype, rows, cols })
    }
}

/// Streaming reader yielding row blocks; the whole matrix is never resident
/// unless asked for.
pub struct FmxReader {
    path: PathBuf,
    header: FmxHeader,
    inner: BufReader<File>,
    rows_read: u64,
}

impl FmxReader {
    /// Opens and validates the header and total file length.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let actual = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let mut inner = BufReader::new(file);
        let mut h = [0u8; FMX_HEADER_LEN as usize];
        if actual < FMX_HEADER_LEN {
            // a short file with a wrong magic is reported as such
            let mut partial = Vec::new();
            inner.read_to_end(&mut partial).map_err(|e| Error::io(&path, e))?;
            if partial.len() >= 4 && partial[..4] != FMX_MAGIC {
                return Err(FormatError::BadMagic {
                    found: partial[..4].try_into().expect("4 bytes"),
                }
                .into());
            }
            return Err(FormatError::Truncated {
                expected: FMX_HEADER_LEN,
                actual,
            }
            .into());
        }
        inner.read_exact(&mut h).map_err(|e| Error::io(&path, e))?;
        let header = FmxHeader::decode(&h)?;
        let expected = header.payload_len()? + FMX_HEADER_LEN;
        if actual < expected {
            return Err(FormatError::Truncated { expected, actual }.into());
        }
        if actual > expected {
            return Err(FormatError::TrailingBytes { expected, actual }.into());
        }
        Ok(Self {
            path,
            header,
            inner,
            rows_read: 0,
        })
    }

    pub fn header(&self) -> FmxHeader {
        self.header
    }

    /// Next block of at most `max_rows` rows, or `None` at the end.
    pub fn next_block(&mut self, max_rows: usize) -> Result<Option<FeatureMatrix>> {
        let remaining = self.header.rows - self.rows_read;
        if remaining == 0 {
            return Ok(None);
        }
        let rows = remaining.min(max_rows.max(1) as u64) as usize;
        let cols = self.header.cols as usize;
        let width = self.header.dtype.width() as usize;
        let mut buf = vec![0u8; rows * cols * width];
        self.inner.read_exact(&mut buf).map_err(|e| Error::io(&self.path, e))?;
        let values: Vec<f64> = match self.header.dtype {
            Dtype::F32 => buf
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect(),
            Dtype::F64 => buf
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect(),
        };
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FormatError::NonFinite {
                row: self.rows_read + (i / cols) as u64,
                col: (i % cols) as u64,
            }
            .into());
        }
        self.rows_read += rows as u64;
        FeatureMatrix::new(rows, cols, values).map(Some)
    }
}

/// Reads a whole fmx file, widening f32 payloads to f64.
pub fn read_fmx(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let mut reader = FmxReader::open(path)?;
    let rows = reader.header().rows;
    let rows = usize::try_from(rows).map_err(|_| FormatError::Overflow {
        rows,
        cols: reader.header().cols,
    })?;
    Ok(reader.next_block(rows)?.expect("header guarantees at least one row"))
}

/// Writes `m` as fmx. With [`Dtype::F32`] values are narrowed.
pub fn write_fmx(path: impl AsRef<Path>, m: &FeatureMatrix, dtype: Dtype) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = FmxHeader {
        dtype,
        rows: m.rows() as u64,
        cols: m.cols() as u64,
    };
    let io = |e| Error::io(path, e);
    w.write_all(&header.encode()).map_err(io)?;
    for &v in m.as_slice() {
        match dtype {
            Dtype::F32 => w.write_all(&(v as f32).to_le_bytes()),
            Dtype::F64 => w.write_all(&v.to_le_bytes()),
        }
        .map_err(io)?;
    }
    w.flush().map_err(io)
}
