use std::path::Path;

use super::{ScoreMeta, ScoreRow, ScoreTable};
use crate::error::Result;
use crate::jsonl::{self, Lines};

pub const SCORES_VERSION: u32 = 1;

pub fn encode_scores(table: &ScoreTable) -> Vec<u8> {
    let mut out = Vec::new();
    jsonl::push_line(&mut out, &table.meta);
    for r in &table.rows {
        jsonl::push_line(&mut out, r);
    }
    out
}

pub fn decode_scores(origin: &str, text: &str) -> Result<ScoreTable> {
    let lines = Lines::split(origin, text)?;
    let meta: ScoreMeta = lines.header()?;
    if meta.version != SCORES_VERSION {
        return Err(lines.err(1, format!("unknown score table version {}", meta.version)));
    }
    let mut rows = Vec::with_capacity(lines.records.len());
    let mut prev: Option<u64> = None;
    for &(line, raw) in &lines.records {
        let row: ScoreRow = jsonl::parse_line(origin, line, raw)?;
        if prev.is_some_and(|p| p >= row.sample_id) {
            return Err(lines.err(line, "rows are not strictly ordered by sample_id"));
        }
        if meta.epochs < 2 || row.s_forget + row.s_persist > meta.epochs - 1 || row.l_count > meta.epochs {
            return Err(lines.err(line, "row counts are inconsistent with T"));
        }
        prev = Some(row.sample_id);
        rows.push(row);
    }
    Ok(ScoreTable { meta, rows })
}

pub fn write_scores(path: &Path, table: &ScoreTable, force: bool) -> Result<()> {
    jsonl::write_atomic(path, &encode_scores(table), force)
}

pub fn read_scores(path: &Path) -> Result<ScoreTable> {
    decode_scores(&path.display().to_string(), &jsonl::read_text(path)?)
}
