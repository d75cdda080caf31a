//! Helpers shared by the line-delimited file formats: one JSON object per
//! line, the first line being a header/meta object.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// A parsed line-delimited file: the header and the raw record lines with
/// their 1-based line numbers.
pub struct Lines<'a> {
    pub origin: String,
    pub header_line: &'a str,
    pub records: Vec<(usize, &'a str)>,
}

impl<'a> Lines<'a> {
    pub fn split(origin: &str, text: &'a str) -> Result<Self> {
        let mut it = text.split('\n').enumerate();
        let header_line = match it.next() {
            Some((_, l)) if !l.trim().is_empty() => l,
            _ => {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: 1,
                    msg: "missing header line".into(),
                })
            }
        };
        let mut records = Vec::new();
        for (i, line) in it {
            if line.is_empty() {
                continue;
            }
            if line.ends_with('\r') {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: i + 1,
                    msg: "CR line endings are not allowed".into(),
                });
            }
            records.push((i + 1, line));
        }
        Ok(Lines {
            origin: origin.to_string(),
            header_line,
            records,
        })
    }

    pub fn header<T: DeserializeOwned>(&self) -> Result<T> {
        parse_line(&self.origin, 1, self.header_line)
    }

    pub fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.origin.clone(),
            line,
            msg: msg.into(),
        }
    }
}

pub fn parse_line<T: DeserializeOwned>(origin: &str, line: usize, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        line,
        msg: e.to_string(),
    })
}

pub fn push_line<T: Serialize>(out: &mut Vec<u8>, value: &T) {
    serde_json::to_writer(&mut *out, value).expect("in-memory serialization");
    out.push(b'\n');
}

pub fn read_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

/// Writes `bytes` to `path` through a temporary sibling file so that a failed
/// write never leaves a truncated output behind. Refuses to replace an
/// existing file unless `force` is set.
pub fn write_atomic(path: &Path, bytes: &[u8], force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(Error::Exists(path.to_path_buf()));
    }
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
