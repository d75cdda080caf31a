//! Line-delimited dataset files.
//!
//! ```text
//! {"version":1,"L":4,"classes":["BPSK","QPSK"],"snr_grid":[18],"counts":{"train":1,"test":1}}
//! {"sample_id":0,"label":0,"snr_db":18,"split":"train","i":[...],"q":[...]}
//! ```

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, IQFrame, ModulationClass, Split};
use crate::error::Result;
use crate::jsonl::{self, Lines};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub version: u32,
    #[serde(rename = "L")]
    pub frame_len: usize,
    pub classes: Vec<ModulationClass>,
    pub snr_grid: Vec<i32>,
    pub counts: SplitCounts,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    sample_id: u64,
    label: usize,
    snr_db: i32,
    split: Split,
    i: Vec<f32>,
    q: Vec<f32>,
}

pub(super) fn encode(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    let header = DatasetHeader {
        version: FORMAT_VERSION,
        frame_len: ds.frame_len,
        classes: ds.classes.clone(),
        snr_grid: ds.snr_grid.clone(),
        counts: SplitCounts {
            train: ds.count(Split::Train),
            test: ds.count(Split::Test),
        },
    };
    jsonl::push_line(&mut out, &header);
    for f in &ds.frames {
        jsonl::push_line(
            &mut out,
            &FrameRecord {
                sample_id: f.sample_id,
                label: f.label,
                snr_db: f.snr_db,
                split: f.split,
                i: f.i.clone(),
                q: f.q.clone(),
            },
        );
    }
    out
}

pub fn decode(origin: &str, text: &str) -> Result<Dataset> {
    let lines = Lines::split(origin, text)?;
    let header: DatasetHeader = lines.header()?;
    if header.version != FORMAT_VERSION {
        return Err(lines.err(1, format!("unsupported version {}", header.version)));
    }
    if header.classes.is_empty() {
        return Err(lines.err(1, "empty class list"));
    }
    let mut seen = HashSet::new();
    let mut frames = Vec::with_capacity(lines.records.len());
    for &(line, raw) in &lines.records {
        let r: FrameRecord = jsonl::parse_line(origin, line, raw)?;
        if r.i.len() != header.frame_len || r.q.len() != header.frame_len {
            return Err(lines.err(
                line,
                format!(
                    "iq rows have lengths {}/{} but header L is {}",
                    r.i.len(),
                    r.q.len(),
                    header.frame_len
                ),
            ));
        }
        if r.label >= header.classes.len() {
            return Err(lines.err(line, format!("label {} out of range", r.label)));
        }
        if !header.snr_grid.contains(&r.snr_db) {
            return Err(lines.err(line, format!("snr_db {} not in header grid", r.snr_db)));
        }
        if !r.i.iter().chain(&r.q).all(|v| v.is_finite()) {
            return Err(lines.err(line, "non-finite sample"));
        }
        if !seen.insert(r.sample_id) {
            return Err(lines.err(line, format!("duplicate sample_id {}", r.sample_id)));
        }
        frames.push(IQFrame {
            sample_id: r.sample_id,
            label: r.label,
            snr_db: r.snr_db,
            split: r.split,
            i: r.i,
            q: r.q,
        });
    }
    let ds = Dataset {
        frame_len: header.frame_len,
        classes: header.classes,
        snr_grid: header.snr_grid,
        frames,
    };
    let counts = SplitCounts {
        train: ds.count(Split::Train),
        test: ds.count(Split::Test),
    };
    if counts != header.counts {
        return Err(lines.err(
            1,
            format!(
                "header counts {:?} disagree with records {:?}",
                header.counts, counts
            ),
        ));
    }
    ds.validate().map_err(|e| lines.err(1, e.to_string()))?;
    Ok(ds)
}

pub fn write_dataset(path: &Path, ds: &Dataset, force: bool) -> Result<()> {
    ds.validate()?;
    jsonl::write_atomic(path, &encode(ds), force)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = jsonl::read_text(path)?;
    decode(&path.display().to_string(), &text)
}
