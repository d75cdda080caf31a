//! Synthetic labeled I/Q datasets.

mod io;
mod modulation;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, tag};

pub use io::{read_dataset, write_dataset, DatasetHeader, SplitCounts, FORMAT_VERSION};
pub use modulation::{add_awgn, modulate_frame, noise_power, symbol_alphabet, Waveform, CPFSK_INDEX};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModulationClass {
    #[serde(rename = "BPSK")]
    Bpsk,
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "PSK8")]
    Psk8,
    #[serde(rename = "QAM16")]
    Qam16,
    #[serde(rename = "PAM4")]
    Pam4,
    #[serde(rename = "CPFSK")]
    Cpfsk,
}

impl ModulationClass {
    pub const ALL: [ModulationClass; 6] = [
        ModulationClass::Bpsk,
        ModulationClass::Qpsk,
        ModulationClass::Psk8,
        ModulationClass::Qam16,
        ModulationClass::Pam4,
        ModulationClass::Cpfsk,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::invalid(format!("unknown modulation class index {index}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationClass::Bpsk => "BPSK",
            ModulationClass::Qpsk => "QPSK",
            ModulationClass::Psk8 => "PSK8",
            ModulationClass::Qam16 => "QAM16",
            ModulationClass::Pam4 => "PAM4",
            ModulationClass::Cpfsk => "CPFSK",
        }
    }
}

impl fmt::Display for ModulationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown modulation class `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One labeled example. `label` indexes the owning dataset's class list.
#[derive(Clone, Debug, PartialEq)]
pub struct IQFrame {
    pub sample_id: u64,
    pub label: usize,
    pub snr_db: i32,
    pub split: Split,
    pub i: Vec<f32>,
    pub q: Vec<f32>,
}

impl IQFrame {
    pub fn frame_len(&self) -> usize {
        self.i.len()
    }

    /// Network input layout: the I rail followed by the Q rail.
    pub fn to_input(&self) -> Vec<f64> {
        self.i.iter().chain(&self.q).map(|&v| v as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub classes: Vec<ModulationClass>,
    pub snr_grid_db: Vec<i32>,
    pub frames_per_class_per_snr: usize,
    pub frame_len: usize,
    pub samples_per_symbol: usize,
    pub train_fraction: f64,
    pub base_seed: u64,
}

/// High-SNR slice used by default experiments.
pub const DEFAULT_SNR_DB: i32 = 18;

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            classes: ModulationClass::ALL.to_vec(),
            snr_grid_db: vec![DEFAULT_SNR_DB],
            frames_per_class_per_snr: 200,
            frame_len: 128,
            samples_per_symbol: 8,
            train_fraction: 0.8,
            base_seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::invalid("class list is empty"));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::invalid("SNR grid is empty"));
        }
        let mut seen = self.classes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.classes.len() {
            return Err(Error::invalid("class list has duplicates"));
        }
        let mut snrs = self.snr_grid_db.clone();
        snrs.sort();
        snrs.dedup();
        if snrs.len() != self.snr_grid_db.len() {
            return Err(Error::invalid("SNR grid has duplicates"));
        }
        if self.frames_per_class_per_snr == 0 {
            return Err(Error::invalid("frames_per_class_per_snr must be at least 1"));
        }
        if self.samples_per_symbol == 0
            || self.frame_len == 0
            || self.frame_len % self.samples_per_symbol != 0
        {
            return Err(Error::invalid(
                "frame_len must be a positive multiple of samples_per_symbol",
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction must be in (0,1)"));
        }
        Ok(())
    }

    /// Frames per (class, snr) cell that land in the training split.
    pub fn train_per_cell(&self) -> usize {
        (self.train_fraction * self.frames_per_class_per_snr as f64).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub frame_len: usize,
    pub classes: Vec<ModulationClass>,
    pub snr_grid: Vec<i32>,
    pub frames: Vec<IQFrame>,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &IQFrame> {
        self.frames.iter().filter(move |f| f.split == split)
    }

    pub fn train(&self) -> impl Iterator<Item = &IQFrame> {
        self.split(Split::Train)
    }

    pub fn test(&self) -> impl Iterator<Item = &IQFrame> {
        self.split(Split::Test)
    }

    /// Network inputs and labels of one split, in file order.
    pub fn examples(&self, split: Split) -> crate::nn::Examples {
        let mut ex = crate::nn::Examples::new(2 * self.frame_len);
        for f in self.split(split) {
            ex.push(&f.to_input(), f.label);
        }
        ex
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// SHA-256 of the canonical file encoding.
    pub fn digest(&self) -> String {
        crate::digest::sha256_hex(&io::encode(self))
    }

    /// Checks label range, frame lengths, finiteness, and that sample ids
    /// are unique and contiguous within each split.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for f in &self.frames {
            if f.label >= self.classes.len() {
                return Err(Error::invalid(format!(
                    "sample {} has label {} outside {} classes",
                    f.sample_id,
                    f.label,
                    self.classes.len()
                )));
            }
            if f.i.len() != self.frame_len || f.q.len() != self.frame_len {
                return Err(Error::invalid(format!(
                    "sample {} has rails of length {}/{}, expected {}",
                    f.sample_id,
                    f.i.len(),
                    f.q.len(),
                    self.frame_len
                )));
            }
            if !f.i.iter().chain(&f.q).all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("sample {} is not finite", f.sample_id)));
            }
            if !seen.insert(f.sample_id) {
                return Err(Error::invalid(format!("duplicate sample_id {}", f.sample_id)));
            }
        }
        for split in [Split::Train, Split::Test] {
            let ids: Vec<u64> = self.split(split).map(|f| f.sample_id).collect();
            if let (Some(lo), Some(hi)) = (ids.iter().min(), ids.iter().max()) {
                if hi - lo + 1 != ids.len() as u64 {
                    return Err(Error::invalid(format!(
                        "{split:?} sample ids are not contiguous"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Seed of one generated frame.
pub fn frame_seed(base_seed: u64, class: ModulationClass, snr_db: i32, ordinal: usize) -> u64 {
    derive_seed(
        base_seed,
        &[class.index() as u64, snr_db as i64 as u64, ordinal as u64],
    )
}

pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.frames_per_class_per_snr;
    let n_train = spec.train_per_cell();

    let cells: Vec<(usize, ModulationClass, i32)> = spec
        .classes
        .iter()
        .enumerate()
        .flat_map(|(label, &c)| spec.snr_grid_db.iter().map(move |&s| (label, c, s)))
        .collect();

    // Each cell yields its frames and the ordinals that go to training.
    let generated: Vec<(Vec<(usize, i32, Waveform)>, Vec<bool>)> = cells
        .par_iter()
        .map(|&(label, class, snr)| -> Result<_> {
            let frames = (0..n)
                .map(|ord| {
                    let seed = frame_seed(spec.base_seed, class, snr, ord);
                    let clean =
                        modulate_frame(class, spec.frame_len, spec.samples_per_symbol, seed)?;
                    let noisy = add_awgn(&clean, snr, derive_seed(seed, &[tag("awgn")]))?;
                    Ok((label, snr, noisy))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = rng_from_seed(derive_seed(
                spec.base_seed,
                &[tag("split"), class.index() as u64, snr as i64 as u64],
            ));
            order.shuffle(&mut rng);
            let mut is_train = vec![false; n];
            for &o in &order[..n_train] {
                is_train[o] = true;
            }
            Ok((frames, is_train))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut frames = Vec::with_capacity(cells.len() * n);
    for split in [Split::Train, Split::Test] {
        for (cell, is_train) in &generated {
            for ((label, snr, wf), &tr) in cell.iter().zip(is_train) {
                if (split == Split::Train) != tr {
                    continue;
                }
                frames.push(IQFrame {
                    sample_id: frames.len() as u64,
                    label: *label,
                    snr_db: *snr,
                    split,
                    i: wf.i.iter().map(|&v| v as f32).collect(),
                    q: wf.q.iter().map(|&v| v as f32).collect(),
                });
            }
        }
    }

    Ok(Dataset {
        frame_len: spec.frame_len,
        classes: spec.classes.clone(),
        snr_grid: spec.snr_grid_db.clone(),
        frames,
    })
}
