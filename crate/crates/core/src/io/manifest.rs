//! Run manifests and atomic report output.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Content hash of one input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

/// Everything needed to reproduce a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub version: String,
    pub seed: Option<u64>,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
}

impl RunManifest {
    /// Starts a manifest stamped with the current time and crate version.
    pub fn start(command: impl Into<String>, config: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        Ok(Self {
            command: command.into(),
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started_unix: unix_now(),
            finished_unix: None,
        })
    }

    pub fn add_input(&mut self, path: impl AsRef<Path>) -> Result<&InputDigest> {
        let digest = digest_file(path)?;
        self.inputs.push(digest);
        Ok(self.inputs.last().expect("just pushed"))
    }

    pub fn finish(mut self) -> Self {
        self.finished_unix = Some(unix_now());
        self
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// A result together with the manifest that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub manifest: RunManifest,
    pub result: T,
}

/// SHA-256 of a file's contents, streamed.
pub fn digest_file(path: impl AsRef<Path>) -> Result<InputDigest> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = reader.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok(InputDigest {
        path: path.to_path_buf(),
        sha256: hex::encode(hasher.finalize()),
        bytes,
    })
}

/// Writes through a temp file in the destination directory, then renames over
/// `path`. Readers never observe a partial file.
pub(crate) fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<&mut tempfile::NamedTempFile>) -> std::io::Result<()>,
) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(&mut tmp);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Pretty JSON, written atomically.
pub fn write_json_atomic(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let json = serde_json::to_vec_pretty(value)?;
    write_atomic(path.as_ref(), |w| {
        w.write_all(&json)?;
        w.write_all(b"\n")
    })
}

/// Flat table as CSV, written atomically.
pub fn write_table_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    {
        let mut w = ::csv::Writer::from_writer(&mut buf);
        let wrap = |e: ::csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
        w.write_record(header).map_err(wrap)?;
        for row in rows {
            w.write_record(row).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    write_atomic(path, |w| w.write_all(&buf))
}
