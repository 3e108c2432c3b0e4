//! Batch manifests: UTF-8, one record per line, five tab-separated fields
//!
//! ```text
//! target_image  target_pseudo  dest_image  dest_labels  output_stem
//! ```
//!
//! Blank lines and lines starting with `#` are skipped. Relative paths are
//! resolved against the manifest's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub target_image: PathBuf,
    pub target_pseudo: PathBuf,
    pub dest_image: PathBuf,
    pub dest_labels: PathBuf,
    pub stem: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub records: Vec<Record>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fsutil::read(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&bytes, path, base)
    }

    /// Parses and validates: every referenced file must exist and stems
    /// must be unique.
    pub fn parse(bytes: &[u8], origin: &Path, base: &Path) -> Result<Self> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| Error::format(origin, e.valid_up_to() as u64, "manifest is not UTF-8"))?;
        let mut records = Vec::new();
        let mut stems = HashSet::new();
        let mut offset = 0u64;
        for (lineno, raw) in text.split_inclusive('\n').enumerate() {
            let line_offset = offset;
            offset += raw.len() as u64;
            let line = raw.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(Error::format(
                    origin,
                    line_offset,
                    format!("line {}: expected 5 tab-separated fields, found {}", lineno + 1, fields.len()),
                ));
            }
            let stem = fields[4].to_string();
            if stem.is_empty() || stem.contains(['/', '\\']) || stem == "." || stem == ".." {
                return Err(Error::format(
                    origin,
                    line_offset,
                    format!("line {}: bad output stem {stem:?}", lineno + 1),
                ));
            }
            if !stems.insert(stem.clone()) {
                return Err(Error::format(
                    origin,
                    line_offset,
                    format!("line {}: duplicate stem {stem:?}", lineno + 1),
                ));
            }
            let resolve = |f: &str| {
                let p = base.join(f);
                if p.is_file() {
                    Ok(p)
                } else {
                    Err(Error::io(&p, std::io::Error::new(std::io::ErrorKind::NotFound, "referenced by manifest")))
                }
            };
            records.push(Record {
                target_image: resolve(fields[0])?,
                target_pseudo: resolve(fields[1])?,
                dest_image: resolve(fields[2])?,
                dest_labels: resolve(fields[3])?,
                stem,
            });
        }
        if records.is_empty() {
            return Err(Error::Data(format!("{}: manifest has no records", origin.display())));
        }
        Ok(Self { records })
    }
}
