//! Training-dynamics recording: train on the full training split and, after
//! every epoch, run a separate inference pass that records each sample's
//! correctness and cross-entropy loss under the end-of-epoch parameters.

mod io;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::{argmax, init_params, predict_all, train_epoch, ModelSpec, Parameters, TrainConfig, TrainState, PROB_FLOOR};

pub use io::{decode_store, encode_store, read_store, write_store, TRAJECTORY_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub version: u32,
    #[serde(rename = "T")]
    pub epochs: usize,
    #[serde(rename = "C")]
    pub num_classes: usize,
    #[serde(rename = "E")]
    pub embedding_dim: usize,
    pub model_digest: String,
    pub config_digest: String,
    pub dataset_digest: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub sample_id: u64,
    pub label: usize,
    pub snr_db: i32,
    /// `correctness[t]` is whether the prediction after epoch t+1 was right.
    pub correctness: Vec<bool>,
    pub losses: Vec<f64>,
    pub final_probs: Vec<f64>,
    pub final_embedding: Vec<f64>,
    /// Every epoch's probability vector; only kept when requested, never
    /// serialized.
    pub epoch_probs: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStore {
    pub meta: TrajectoryMeta,
    pub records: Vec<TrajectoryRecord>,
}

impl TrajectoryStore {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// SHA-256 of the canonical file encoding.
    pub fn digest(&self) -> String {
        crate::digest::sha256_hex(&encode_store(self))
    }

    /// Mean correctness at each epoch.
    pub fn accuracy_per_epoch(&self) -> Vec<f64> {
        let n = self.records.len().max(1) as f64;
        (0..self.meta.epochs)
            .map(|t| self.records.iter().filter(|r| r.correctness[t]).count() as f64 / n)
            .collect()
    }

    /// Checks record shapes against the meta, value ranges, and id order.
    pub fn validate(&self) -> Result<()> {
        let m = &self.meta;
        let mut prev: Option<u64> = None;
        for (k, r) in self.records.iter().enumerate() {
            let bad = |msg: String| Error::invalid(format!("record {k} (sample {}): {msg}", r.sample_id));
            if r.correctness.len() != m.epochs || r.losses.len() != m.epochs {
                return Err(bad(format!(
                    "{} bits and {} losses, meta T is {}",
                    r.correctness.len(),
                    r.losses.len(),
                    m.epochs
                )));
            }
            if r.final_probs.len() != m.num_classes {
                return Err(bad(format!("{} probabilities, meta C is {}", r.final_probs.len(), m.num_classes)));
            }
            if r.final_embedding.len() != m.embedding_dim {
                return Err(bad(format!(
                    "embedding width {}, meta E is {}",
                    r.final_embedding.len(),
                    m.embedding_dim
                )));
            }
            if r.label >= m.num_classes {
                return Err(bad(format!("label {} out of range", r.label)));
            }
            if !r.losses.iter().all(|l| l.is_finite() && *l >= 0.0) {
                return Err(bad("losses must be finite and non-negative".into()));
            }
            if !r.final_embedding.iter().all(|v| v.is_finite()) {
                return Err(bad("embedding is not finite".into()));
            }
            if prev.is_some_and(|p| p >= r.sample_id) {
                return Err(bad("records are not strictly ordered by sample_id".into()));
            }
            prev = Some(r.sample_id);
        }
        Ok(())
    }

    /// Fails unless the store was recorded from `dataset`, and covers its
    /// training split exactly.
    pub fn verify_dataset(&self, dataset: &Dataset) -> Result<()> {
        let found = dataset.digest();
        if found != self.meta.dataset_digest {
            return Err(Error::DigestMismatch {
                what: "dataset",
                expected: self.meta.dataset_digest.clone(),
                found,
            });
        }
        let mut ids: Vec<u64> = dataset.train().map(|f| f.sample_id).collect();
        ids.sort_unstable();
        let stored: Vec<u64> = self.records.iter().map(|r| r.sample_id).collect();
        if ids != stored {
            return Err(Error::invalid("trajectory ids do not match the training split"));
        }
        Ok(())
    }
}

/// Per-epoch correctness indicator.
pub fn correctness(predicted: usize, label: usize, num_classes: usize) -> Result<bool> {
    if predicted >= num_classes || label >= num_classes {
        return Err(Error::invalid(format!(
            "labels ({predicted}, {label}) outside [0, {num_classes})"
        )));
    }
    Ok(predicted == label)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RecordOptions {
    /// Retain every epoch's probability vector (T times the storage).
    pub keep_epoch_probs: bool,
}

pub fn record_training(dataset: &Dataset, spec: &ModelSpec, cfg: &TrainConfig) -> Result<TrajectoryStore> {
    Ok(record_training_with(dataset, spec, cfg, RecordOptions::default())?.0)
}

/// Records the store and also returns the final parameters.
pub fn record_training_with(
    dataset: &Dataset,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    opts: RecordOptions,
) -> Result<(TrajectoryStore, Parameters)> {
    if cfg.epochs < 2 {
        return Err(Error::invalid("recording needs at least 2 epochs"));
    }
    if spec.frame_len != dataset.frame_len || spec.num_classes != dataset.num_classes() {
        return Err(Error::invalid("model spec does not match dataset shape"));
    }
    let mut frames: Vec<_> = dataset.train().collect();
    if frames.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    frames.sort_by_key(|f| f.sample_id);
    let mut data = crate::nn::Examples::new(spec.input_dim());
    for f in &frames {
        data.push(&f.to_input(), f.label);
    }

    let n = frames.len();
    let t_max = cfg.epochs;
    let mut bits = vec![Vec::with_capacity(t_max); n];
    let mut losses = vec![Vec::with_capacity(t_max); n];
    let mut epoch_probs: Vec<Vec<Vec<f64>>> = if opts.keep_epoch_probs {
        vec![Vec::with_capacity(t_max); n]
    } else {
        Vec::new()
    };

    let mut params = init_params(spec, cfg.seed)?;
    let mut state = TrainState::new(params.len(), cfg);
    let mut last = Vec::new();
    for _ in 0..t_max {
        train_epoch(spec, &mut params, &data, cfg, &mut state)?;
        let outs = predict_all(spec, &params, &data);
        for (k, out) in outs.iter().enumerate() {
            let y = data.labels[k];
            bits[k].push(correctness(argmax(&out.probs), y, spec.num_classes)?);
            losses[k].push(-out.probs[y].max(PROB_FLOOR).ln());
            if opts.keep_epoch_probs {
                epoch_probs[k].push(out.probs.clone());
            }
        }
        last = outs;
    }

    let mut epoch_probs = epoch_probs.into_iter();
    let records = frames
        .iter()
        .zip(bits)
        .zip(losses)
        .zip(last)
        .map(|(((f, b), l), out)| TrajectoryRecord {
            sample_id: f.sample_id,
            label: f.label,
            snr_db: f.snr_db,
            correctness: b,
            losses: l,
            final_probs: out.probs,
            final_embedding: out.embedding,
            epoch_probs: epoch_probs.next(),
        })
        .collect();

    let store = TrajectoryStore {
        meta: TrajectoryMeta {
            version: TRAJECTORY_VERSION,
            epochs: t_max,
            num_classes: spec.num_classes,
            embedding_dim: spec.embedding_dim,
            model_digest: spec.digest(),
            config_digest: cfg.digest(),
            dataset_digest: dataset.digest(),
        },
        records,
    };
    Ok((store, params))
}
