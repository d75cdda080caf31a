//! Trajectory files: a meta line, then one record per training sample with
//! the correctness bits packed into a "0"/"1" string.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TrajectoryMeta, TrajectoryRecord, TrajectoryStore};
use crate::error::Result;
use crate::jsonl::{self, Lines};

pub const TRAJECTORY_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    sample_id: u64,
    label: usize,
    snr_db: i32,
    bits: String,
    losses: Vec<f64>,
    final_probs: Vec<f64>,
    final_embedding: Vec<f64>,
}

pub fn encode_store(store: &TrajectoryStore) -> Vec<u8> {
    let mut out = Vec::new();
    jsonl::push_line(&mut out, &store.meta);
    for r in &store.records {
        jsonl::push_line(
            &mut out,
            &RecordLine {
                sample_id: r.sample_id,
                label: r.label,
                snr_db: r.snr_db,
                bits: r.correctness.iter().map(|&b| if b { '1' } else { '0' }).collect(),
                losses: r.losses.clone(),
                final_probs: r.final_probs.clone(),
                final_embedding: r.final_embedding.clone(),
            },
        );
    }
    out
}

pub fn decode_store(origin: &str, text: &str) -> Result<TrajectoryStore> {
    let lines = Lines::split(origin, text)?;
    let meta: TrajectoryMeta = lines.header()?;
    if meta.version != TRAJECTORY_VERSION {
        return Err(lines.err(1, format!("unknown trajectory version {}", meta.version)));
    }
    let mut records = Vec::with_capacity(lines.records.len());
    for (index, &(line, raw)) in lines.records.iter().enumerate() {
        let r: RecordLine = jsonl::parse_line(origin, line, raw)?;
        let correctness = r
            .bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(lines.err(line, format!("record {index}: invalid bit {other:?}"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        if correctness.len() != meta.epochs || r.losses.len() != meta.epochs {
            return Err(lines.err(
                line,
                format!(
                    "record {index}: {} bits / {} losses but meta T is {}",
                    correctness.len(),
                    r.losses.len(),
                    meta.epochs
                ),
            ));
        }
        records.push(TrajectoryRecord {
            sample_id: r.sample_id,
            label: r.label,
            snr_db: r.snr_db,
            correctness,
            losses: r.losses,
            final_probs: r.final_probs,
            final_embedding: r.final_embedding,
            epoch_probs: None,
        });
    }
    let store = TrajectoryStore { meta, records };
    store.validate().map_err(|e| lines.err(1, e.to_string()))?;
    Ok(store)
}

pub fn write_store(path: &Path, store: &TrajectoryStore, force: bool) -> Result<()> {
    store.validate()?;
    jsonl::write_atomic(path, &encode_store(store), force)
}

pub fn read_store(path: &Path) -> Result<TrajectoryStore> {
    decode_store(&path.display().to_string(), &jsonl::read_text(path)?)
}
