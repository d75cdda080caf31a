//! Coreset files: the manifest as a JSON line, then one sample id per line.

use std::collections::HashSet;
use std::path::Path;

use super::{Coreset, Manifest};
use crate::error::Result;
use crate::jsonl::{self, Lines};

pub fn encode_coreset(c: &Coreset) -> Vec<u8> {
    let mut out = Vec::new();
    jsonl::push_line(&mut out, &c.manifest);
    for id in &c.indices {
        out.extend_from_slice(id.to_string().as_bytes());
        out.push(b'\n');
    }
    out
}

pub fn decode_coreset(origin: &str, text: &str) -> Result<Coreset> {
    let lines = Lines::split(origin, text)?;
    let manifest: Manifest = lines.header()?;
    let mut seen = HashSet::new();
    let mut indices = Vec::with_capacity(lines.records.len());
    for &(line, raw) in &lines.records {
        let id: u64 = raw
            .trim()
            .parse()
            .map_err(|_| lines.err(line, format!("not a sample id: {raw:?}")))?;
        if !seen.insert(id) {
            return Err(lines.err(line, format!("duplicate sample id {id}")));
        }
        indices.push(id);
    }
    if indices.len() != manifest.budget {
        return Err(lines.err(1, format!("manifest budget {} but {} ids", manifest.budget, indices.len())));
    }
    Ok(Coreset { indices, manifest })
}

pub fn write_coreset(path: &Path, c: &Coreset, force: bool) -> Result<()> {
    jsonl::write_atomic(path, &encode_coreset(c), force)
}

pub fn read_coreset(path: &Path) -> Result<Coreset> {
    decode_coreset(&path.display().to_string(), &jsonl::read_text(path)?)
}
