//! File formats, manifests and report writing.

mod delimited;
mod fmx;
mod manifest;

pub use delimited::{read_csv_features, read_labels, write_csv_features};
pub use fmx::{read_fmx, write_fmx, Dtype, FmxHeader, FmxReader, FormatError, FMX_HEADER_LEN, FMX_MAGIC};
pub use manifest::{digest_file, write_json_atomic, write_table_csv, InputDigest, Report, RunManifest};

use std::path::Path;

use crate::error::Result;
use crate::features::FeatureMatrix;

/// Reads features by extension: `.csv` is parsed as text, anything else as fmx.
pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => read_csv_features(path),
        _ => read_fmx(path),
    }
}
