//! Builders for synthetic trajectory stores and score tables.
#![allow(dead_code)]

use foqus_core::dynamics::{TrajectoryMeta, TrajectoryRecord, TrajectoryStore};
use foqus_core::nn::softmax;
use foqus_core::scoring::{score_dataset, ScoreTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random store: `n` records over `classes` labels (round-robin, so class
/// sizes differ by at most one), `snrs` SNR values, `t` epochs.
pub fn random_store(seed: u64, n: usize, t: usize, classes: usize, snrs: &[i32], emb: usize) -> TrajectoryStore {
    let mut r = rng(seed);
    let records = (0..n)
        .map(|k| {
            let label = k % classes;
            let p_correct: f64 = r.random();
            let correctness: Vec<bool> = (0..t).map(|_| r.random::<f64>() < p_correct).collect();
            let losses: Vec<f64> = (0..t)
                .map(|_| {
                    // Occasionally exact zeros and large values.
                    match r.random_range(0..20) {
                        0 => 0.0,
                        1 => r.random_range(5.0..27.0),
                        _ => r.random_range(0.0..3.0),
                    }
                })
                .collect();
            let logits: Vec<f64> = (0..classes).map(|_| r.random_range(-4.0..4.0)).collect();
            TrajectoryRecord {
                sample_id: k as u64,
                label,
                snr_db: snrs[r.random_range(0..snrs.len())],
                correctness,
                losses,
                final_probs: softmax(&logits),
                final_embedding: (0..emb).map(|_| r.random_range(-2.0..2.0)).collect(),
                epoch_probs: None,
            }
        })
        .collect();
    TrajectoryStore {
        meta: TrajectoryMeta {
            version: 1,
            epochs: t,
            num_classes: classes,
            embedding_dim: emb,
            model_digest: "synthetic".into(),
            config_digest: "synthetic".into(),
            dataset_digest: "synthetic".into(),
        },
        records,
    }
}

pub fn random_table(seed: u64, n: usize, t: usize, classes: usize) -> (TrajectoryStore, ScoreTable) {
    let store = random_store(seed, n, t, classes, &[18], 4);
    let table = score_dataset(&store, None).unwrap();
    (store, table)
}
