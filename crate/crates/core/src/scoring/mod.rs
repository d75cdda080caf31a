//! Per-sample scores derived from recorded trajectories.
//!
//! With T recorded epochs and correctness bits c(1..T):
//!
//! * forgetting events: transitions c(t-1)=1 -> c(t)=0, t in 2..=T
//! * persistent errors: transitions c(t-1)=0 -> c(t)=0, t in 2..=T
//! * quality: count/T - beta * accum/T, where accum sums the per-epoch
//!   cross-entropy and count sums the bits
//! * combined: forget/(T-1) + persist/(T-1) + quality
//!
//! All arithmetic is f64 and evaluated left to right so that independent
//! recomputations agree bit for bit.

mod io;

use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryStore;
use crate::error::{Error, Result};

pub use io::{decode_scores, encode_scores, read_scores, write_scores, SCORES_VERSION};

/// Default loss weight in the quality score.
pub const DEFAULT_BETA: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxMetrics {
    pub entropy: f64,
    pub margin: f64,
    pub confidence: f64,
    pub grand: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub sample_id: u64,
    pub label: usize,
    pub snr_db: i32,
    pub s_forget: usize,
    pub s_persist: usize,
    pub l_accum: f64,
    pub l_count: usize,
    pub s_quality: f64,
    pub s_foqus: f64,
    pub aux: AuxMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMeta {
    pub version: u32,
    #[serde(rename = "T")]
    pub epochs: usize,
    pub beta: f64,
    pub trajectory_digest: String,
    /// Which terms enter `s_foqus`; all three outside ablations.
    #[serde(default)]
    pub mask: ComponentMask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub meta: ScoreMeta,
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn digest(&self) -> String {
        crate::digest::sha256_hex(&encode_scores(self))
    }

    pub fn verify_store(&self, store: &TrajectoryStore) -> Result<()> {
        let found = store.digest();
        if found != self.meta.trajectory_digest {
            return Err(Error::DigestMismatch {
                what: "trajectory",
                expected: self.meta.trajectory_digest.clone(),
                found,
            });
        }
        Ok(())
    }

    /// Copy of the table whose combined score keeps only the terms in `mask`.
    pub fn with_mask(&self, mask: ComponentMask) -> Result<ScoreTable> {
        let t = self.meta.epochs;
        let rows = self
            .rows
            .iter()
            .map(|r| {
                Ok(ScoreRow {
                    s_foqus: masked_score(r.s_forget, r.s_persist, r.s_quality, t, mask)?,
                    ..r.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoreTable {
            meta: ScoreMeta {
                mask,
                ..self.meta.clone()
            },
            rows,
        })
    }
}

/// Counts forgetting events and persistent-error transitions.
pub fn transition_scores(bits: &[bool]) -> Result<(usize, usize)> {
    if bits.len() < 2 {
        return Err(Error::invalid("need at least 2 epochs of correctness bits"));
    }
    let mut forget = 0;
    let mut persist = 0;
    for w in bits.windows(2) {
        match (w[0], w[1]) {
            (true, false) => forget += 1,
            (false, false) => persist += 1,
            _ => {}
        }
    }
    Ok((forget, persist))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quality {
    pub l_accum: f64,
    pub l_count: usize,
    pub s_quality: f64,
}

pub fn quality_score(losses: &[f64], bits: &[bool], beta: f64) -> Result<Quality> {
    if losses.len() != bits.len() {
        return Err(Error::invalid(format!(
            "{} losses but {} correctness bits",
            losses.len(),
            bits.len()
        )));
    }
    if losses.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::invalid("beta must be finite and non-negative"));
    }
    if !losses.iter().all(|l| l.is_finite() && *l >= 0.0) {
        return Err(Error::invalid("losses must be finite and non-negative"));
    }
    let t = losses.len() as f64;
    let l_accum: f64 = losses.iter().sum();
    let l_count = bits.iter().filter(|&&b| b).count();
    let s_quality = l_count as f64 / t - beta * l_accum / t;
    Ok(Quality {
        l_accum,
        l_count,
        s_quality,
    })
}

pub fn foqus_score(s_forget: usize, s_persist: usize, s_quality: f64, epochs: usize) -> Result<f64> {
    masked_score(s_forget, s_persist, s_quality, epochs, ComponentMask::ALL)
}

/// Subset of the three score terms that enter the combined score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComponentMask {
    pub forget: bool,
    pub persist: bool,
    pub quality: bool,
}

impl Default for ComponentMask {
    fn default() -> Self {
        Self::ALL
    }
}

impl ComponentMask {
    pub const ALL: ComponentMask = ComponentMask {
        forget: true,
        persist: true,
        quality: true,
    };

    /// The seven non-empty subsets: singles, then pairs, then all three.
    pub fn combinations() -> [ComponentMask; 7] {
        let m = |forget, persist, quality| ComponentMask {
            forget,
            persist,
            quality,
        };
        [
            m(true, false, false),
            m(false, true, false),
            m(false, false, true),
            m(true, true, false),
            m(true, false, true),
            m(false, true, true),
            m(true, true, true),
        ]
    }

    pub fn label(&self) -> String {
        let parts: Vec<&str> = [
            (self.forget, "forget"),
            (self.persist, "persist"),
            (self.quality, "quality"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        parts.join("+")
    }
}

pub fn masked_score(
    s_forget: usize,
    s_persist: usize,
    s_quality: f64,
    epochs: usize,
    mask: ComponentMask,
) -> Result<f64> {
    if epochs < 2 {
        return Err(Error::invalid("need at least 2 epochs"));
    }
    let denom = (epochs - 1) as f64;
    let f = if mask.forget { s_forget as f64 / denom } else { 0.0 };
    let p = if mask.persist { s_persist as f64 / denom } else { 0.0 };
    let q = if mask.quality { s_quality } else { 0.0 };
    Ok(f + p + q)
}

/// Entropy, top-two margin, confidence, and the norm of the cross-entropy
/// gradient with respect to the output layer (weights and bias), which is
/// `||p - onehot(label)|| * ||[h; 1]||` for embedding `h`.
pub fn aux_metrics(probs: &[f64], embedding: &[f64], label: usize) -> Result<AuxMetrics> {
    if label >= probs.len() {
        return Err(Error::invalid(format!("label {label} out of range")));
    }
    if !probs.iter().all(|p| p.is_finite() && *p >= 0.0)
        || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-6
    {
        return Err(Error::invalid("probabilities are not a distribution"));
    }
    let entropy = -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>();
    let (mut top, mut second) = (f64::NEG_INFINITY, 0.0f64);
    for &p in probs {
        if p > top {
            second = top.max(second);
            top = p;
        } else if p > second {
            second = p;
        }
    }
    let second = second.max(0.0);
    let resid: f64 = probs
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let d = p - if k == label { 1.0 } else { 0.0 };
            d * d
        })
        .sum();
    let feat: f64 = embedding.iter().map(|h| h * h).sum::<f64>() + 1.0;
    Ok(AuxMetrics {
        entropy: entropy.max(0.0),
        margin: top - second,
        confidence: top,
        grand: resid.sqrt() * feat.sqrt(),
    })
}

pub fn score_dataset(store: &TrajectoryStore, beta: Option<f64>) -> Result<ScoreTable> {
    let beta = beta.unwrap_or(DEFAULT_BETA);
    let t = store.meta.epochs;
    if t < 2 {
        return Err(Error::invalid("trajectories need at least 2 epochs"));
    }
    store.validate()?;
    let rows = store
        .records
        .iter()
        .map(|r| {
            let (s_forget, s_persist) = transition_scores(&r.correctness)?;
            let q = quality_score(&r.losses, &r.correctness, beta)?;
            Ok(ScoreRow {
                sample_id: r.sample_id,
                label: r.label,
                snr_db: r.snr_db,
                s_forget,
                s_persist,
                l_accum: q.l_accum,
                l_count: q.l_count,
                s_quality: q.s_quality,
                s_foqus: foqus_score(s_forget, s_persist, q.s_quality, t)?,
                aux: aux_metrics(&r.final_probs, &r.final_embedding, r.label)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreTable {
        meta: ScoreMeta {
            version: SCORES_VERSION,
            epochs: t,
            beta,
            trajectory_digest: store.digest(),
            mask: ComponentMask::ALL,
        },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &[u8]) -> Vec<bool> {
        s.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn transition_examples() {
        assert_eq!(transition_scores(&bits(&[0, 0, 1, 0, 0])).unwrap(), (1, 2));
        assert_eq!(transition_scores(&[true; 50]).unwrap(), (0, 0));
        assert_eq!(transition_scores(&[false; 50]).unwrap(), (0, 49));
        let alt: Vec<bool> = (0..50).map(|t| t % 2 == 0).collect();
        assert_eq!(transition_scores(&alt).unwrap(), (25, 0));
        assert!(transition_scores(&[true]).is_err());
    }

    #[test]
    fn quality_examples() {
        let q = quality_score(&[0.0; 7], &[true; 7], 0.1).unwrap();
        assert_eq!(q.s_quality, 1.0);

        let q = quality_score(&[2.0, 1.5, 0.5, 1.2, 1.8], &bits(&[0, 0, 1, 0, 0]), 0.1).unwrap();
        assert_eq!(q.l_accum, 7.0);
        assert_eq!(q.l_count, 1);
        assert!((q.s_quality - 0.06).abs() < 1e-12);

        let q = quality_score(&[0.3, 0.9, 0.1, 0.2], &bits(&[1, 0, 1, 1]), 0.0).unwrap();
        assert_eq!(q.s_quality, 0.75);

        assert!(quality_score(&[0.1, 0.2], &[true], 0.1).is_err());
    }

    #[test]
    fn combined_examples() {
        assert!((foqus_score(1, 2, 0.06, 5).unwrap() - 0.81).abs() < 1e-12);
        assert_eq!(foqus_score(0, 0, 1.0, 9).unwrap(), 1.0);
        assert_eq!(foqus_score(0, 19, 0.3, 20).unwrap(), 1.0 + 0.3);
        assert!(foqus_score(0, 0, 1.0, 1).is_err());
    }

    #[test]
    fn masks_cover_seven_subsets() {
        let combos = ComponentMask::combinations();
        let mut seen = std::collections::HashSet::new();
        for m in combos {
            assert!(m.forget || m.persist || m.quality);
            assert!(seen.insert(m));
        }
        assert_eq!(combos[6], ComponentMask::ALL);
        assert_eq!(
            masked_score(1, 2, 0.06, 5, ComponentMask::ALL).unwrap(),
            foqus_score(1, 2, 0.06, 5).unwrap()
        );
        let only_q = ComponentMask {
            forget: false,
            persist: false,
            quality: true,
        };
        assert_eq!(masked_score(3, 1, 0.4, 5, only_q).unwrap(), 0.4);
    }

    #[test]
    fn aux_uniform() {
        let a = aux_metrics(&[1.0 / 6.0; 6], &[0.0; 3], 0).unwrap();
        assert!((a.entropy - 6f64.ln()).abs() < 1e-12);
        assert!((a.entropy - 1.7918).abs() < 1e-4);
        assert_eq!(a.margin, 0.0);
        assert!((a.confidence - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn aux_one_hot() {
        let a = aux_metrics(&[0.0, 1.0, 0.0], &[2.0, -1.0], 1).unwrap();
        assert_eq!(a.entropy, 0.0);
        assert_eq!(a.margin, 1.0);
        assert_eq!(a.confidence, 1.0);
        assert_eq!(a.grand, 0.0);
    }

    #[test]
    fn aux_grand_closed_form() {
        let a = aux_metrics(&[0.7, 0.2, 0.1], &[3.0, 4.0], 0).unwrap();
        // ||(-0.3, 0.2, 0.1)|| * ||(3, 4, 1)||
        let expected = (0.14f64).sqrt() * 26f64.sqrt();
        assert!((a.grand - expected).abs() < 1e-12);
        // 0.3742 * 5.0990 = 1.9080 with both factors rounded to 4 places.
        assert!((a.grand - 1.9080).abs() < 5e-4);
        assert!((a.grand - 1.907878).abs() < 1e-6);
        assert!((a.margin - 0.5).abs() < 1e-12);
    }

    #[test]
    fn aux_rejects_non_distribution() {
        assert!(aux_metrics(&[0.5, 0.6], &[], 0).is_err());
        assert!(aux_metrics(&[-0.1, 1.1], &[], 0).is_err());
        assert!(aux_metrics(&[0.5, 0.5], &[], 2).is_err());
    }
}
