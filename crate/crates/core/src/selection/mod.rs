//! Class-balanced coreset selectors.
//!
//! Every selector splits the pool into groups (one per class when
//! class-balanced, further split by SNR when SNR-stratified), gives each
//! group a largest-remainder share of `round(rate * N)`, and picks that many
//! members from it. Output ids are sorted ascending.

mod apportion;
mod geometry;
mod io;
mod tiered;

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryStore;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, tag};
use crate::scoring::{ScoreRow, ScoreTable};

pub use apportion::{apportion, plan_groups, total_budget, Group};
pub use geometry::{herding, k_center};
pub use io::{decode_coreset, encode_coreset, read_coreset, write_coreset};
pub use tiered::{rank_by_score, tier_quotas, tier_sizes};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Foqus,
    Uniform,
    Forgetting,
    Grand,
    Entropy,
    Margin,
    LeastConfidence,
    Herding,
    Kcenter,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Foqus,
        Method::Uniform,
        Method::Forgetting,
        Method::Grand,
        Method::Entropy,
        Method::Margin,
        Method::LeastConfidence,
        Method::Herding,
        Method::Kcenter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Foqus => "foqus",
            Method::Uniform => "uniform",
            Method::Forgetting => "forgetting",
            Method::Grand => "grand",
            Method::Entropy => "entropy",
            Method::Margin => "margin",
            Method::LeastConfidence => "least_confidence",
            Method::Herding => "herding",
            Method::Kcenter => "kcenter",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::Foqus | Method::Uniform)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown selection method `{s}`")))
    }
}

pub const EQUAL_TIERS: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub method: Method,
    pub rate: f64,
    pub tiers: [f64; 3],
    pub class_balanced: bool,
    pub snr_stratified: bool,
    pub seed: u64,
}

impl SelectionConfig {
    pub fn new(method: Method, rate: f64, seed: u64) -> Self {
        SelectionConfig {
            method,
            rate,
            tiers: EQUAL_TIERS,
            class_balanced: true,
            snr_stratified: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_rate(self.rate)?;
        validate_tiers(self.tiers)
    }
}

pub fn validate_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("rate must be in (0,1]"))
    }
}

pub fn validate_tiers(tiers: [f64; 3]) -> Result<()> {
    if tiers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("tier proportions must be non-negative"));
    }
    if (tiers.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("tier proportions must sum to 1"));
    }
    Ok(())
}

/// One pool member as seen by the selectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub sample_id: u64,
    pub label: usize,
    pub snr_db: i32,
}

impl PoolEntry {
    pub fn from_scores(table: &ScoreTable) -> Vec<PoolEntry> {
        table
            .rows
            .iter()
            .map(|r| PoolEntry {
                sample_id: r.sample_id,
                label: r.label,
                snr_db: r.snr_db,
            })
            .collect()
    }

    pub fn from_store(store: &TrajectoryStore) -> Vec<PoolEntry> {
        store
            .records
            .iter()
            .map(|r| PoolEntry {
                sample_id: r.sample_id,
                label: r.label,
                snr_db: r.snr_db,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierDraw {
    pub label: Option<usize>,
    pub snr_db: Option<i32>,
    pub tier_sizes: [usize; 3],
    pub draws: [usize; 3],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCount {
    pub label: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: SelectionConfig,
    /// Digest of the score table or trajectory store selected from.
    pub source_digest: String,
    pub pool_size: usize,
    pub budget: usize,
    pub per_class: Vec<ClassCount>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tier_draws: Vec<TierDraw>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coreset {
    pub indices: Vec<u64>,
    pub manifest: Manifest,
}

impl Coreset {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn digest(&self) -> String {
        crate::digest::json_digest(&self.indices)
    }
}

fn finish(
    pool: &[PoolEntry],
    chosen: Vec<usize>,
    cfg: &SelectionConfig,
    source_digest: String,
    tier_draws: Vec<TierDraw>,
) -> Coreset {
    let mut indices: Vec<u64> = chosen.iter().map(|&k| pool[k].sample_id).collect();
    indices.sort_unstable();
    let mut per_class: Vec<ClassCount> = Vec::new();
    let mut labels: Vec<usize> = chosen.iter().map(|&k| pool[k].label).collect();
    labels.sort_unstable();
    for l in labels {
        match per_class.last_mut() {
            Some(c) if c.label == l => c.count += 1,
            _ => per_class.push(ClassCount { label: l, count: 1 }),
        }
    }
    Coreset {
        manifest: Manifest {
            config: cfg.clone(),
            source_digest,
            pool_size: pool.len(),
            budget: indices.len(),
            per_class,
            tier_draws,
        },
        indices,
    }
}

fn expect_method(cfg: &SelectionConfig, allowed: &[Method]) -> Result<()> {
    if allowed.contains(&cfg.method) {
        Ok(())
    } else {
        Err(Error::invalid(format!("selector does not implement method {}", cfg.method)))
    }
}

/// Three-tier proportional sampling on the combined score.
pub fn tiered_select(scores: &ScoreTable, cfg: &SelectionConfig) -> Result<Coreset> {
    expect_method(cfg, &[Method::Foqus])?;
    let pool = PoolEntry::from_scores(scores);
    let groups = plan_groups(&pool, cfg)?;
    let mut chosen = Vec::new();
    let mut draws = Vec::with_capacity(groups.len());
    for g in &groups {
        let (picked, draw) = tiered::select_group(&scores.rows, g, cfg.tiers, cfg.seed);
        chosen.extend(picked);
        draws.push(draw);
    }
    Ok(finish(&pool, chosen, cfg, scores.digest(), draws))
}

/// Uniform draw without replacement within each group.
pub fn uniform_select(pool: &[PoolEntry], cfg: &SelectionConfig) -> Result<Coreset> {
    expect_method(cfg, &[Method::Uniform])?;
    let groups = plan_groups(pool, cfg)?;
    let mut chosen = Vec::new();
    for g in &groups {
        let words = g.seed_words();
        let mut rng = rng_from_seed(derive_seed(cfg.seed, &[tag("uniform"), words[0], words[1]]));
        chosen.extend(sample(&mut rng, g.members.len(), g.budget).into_iter().map(|p| g.members[p]));
    }
    Ok(finish(pool, chosen, cfg, crate::digest::json_digest(&pool), Vec::new()))
}

/// Takes the `budget` best members of each group under `before`, a strict
/// "ranks ahead of" order on score rows; ties fall back to ascending id.
fn rank_select(
    scores: &ScoreTable,
    cfg: &SelectionConfig,
    before: impl Fn(&ScoreRow, &ScoreRow) -> std::cmp::Ordering,
) -> Result<Coreset> {
    let pool = PoolEntry::from_scores(scores);
    let groups = plan_groups(&pool, cfg)?;
    let rows = &scores.rows;
    let mut chosen = Vec::new();
    for g in &groups {
        let mut ranked = g.members.clone();
        ranked.sort_by(|&a, &b| before(&rows[a], &rows[b]).then(rows[a].sample_id.cmp(&rows[b].sample_id)));
        chosen.extend_from_slice(&ranked[..g.budget]);
    }
    Ok(finish(&pool, chosen, cfg, scores.digest(), Vec::new()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopkMetric {
    Forget,
    Grand,
}

/// Highest forgetting count or gradient norm first.
pub fn topk_select(scores: &ScoreTable, metric: TopkMetric, cfg: &SelectionConfig) -> Result<Coreset> {
    expect_method(cfg, &[Method::Forgetting, Method::Grand])?;
    match metric {
        TopkMetric::Forget => rank_select(scores, cfg, |a, b| b.s_forget.cmp(&a.s_forget)),
        TopkMetric::Grand => rank_select(scores, cfg, |a, b| b.aux.grand.total_cmp(&a.aux.grand)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UncertaintyKind {
    Entropy,
    Margin,
    LeastConfidence,
}

/// Most uncertain first: highest entropy, smallest margin, or lowest
/// confidence.
pub fn uncertainty_select(scores: &ScoreTable, kind: UncertaintyKind, cfg: &SelectionConfig) -> Result<Coreset> {
    expect_method(cfg, &[Method::Entropy, Method::Margin, Method::LeastConfidence])?;
    match kind {
        UncertaintyKind::Entropy => rank_select(scores, cfg, |a, b| b.aux.entropy.total_cmp(&a.aux.entropy)),
        UncertaintyKind::Margin => rank_select(scores, cfg, |a, b| a.aux.margin.total_cmp(&b.aux.margin)),
        UncertaintyKind::LeastConfidence => {
            rank_select(scores, cfg, |a, b| a.aux.confidence.total_cmp(&b.aux.confidence))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeometryKind {
    Herding,
    KCenter,
}

/// Herding or k-center greedy on the final-epoch embeddings.
pub fn geometry_select(store: &TrajectoryStore, kind: GeometryKind, cfg: &SelectionConfig) -> Result<Coreset> {
    expect_method(cfg, &[Method::Herding, Method::Kcenter])?;
    if store.meta.embedding_dim == 0 || store.records.iter().any(|r| r.final_embedding.is_empty()) {
        return Err(Error::invalid("geometry selection needs non-empty embeddings"));
    }
    let pool = PoolEntry::from_store(store);
    let groups = plan_groups(&pool, cfg)?;
    let points: Vec<&[f64]> = store.records.iter().map(|r| r.final_embedding.as_slice()).collect();
    let mut chosen = Vec::new();
    for g in &groups {
        chosen.extend(match kind {
            GeometryKind::Herding => herding(&points, g),
            GeometryKind::KCenter => k_center(&points, g),
        });
    }
    Ok(finish(&pool, chosen, cfg, store.digest(), Vec::new()))
}

/// Dispatches on `cfg.method`. Geometry methods need the trajectory store.
pub fn select(scores: &ScoreTable, store: Option<&TrajectoryStore>, cfg: &SelectionConfig) -> Result<Coreset> {
    match cfg.method {
        Method::Foqus => tiered_select(scores, cfg),
        Method::Uniform => uniform_select(&PoolEntry::from_scores(scores), cfg),
        Method::Forgetting => topk_select(scores, TopkMetric::Forget, cfg),
        Method::Grand => topk_select(scores, TopkMetric::Grand, cfg),
        Method::Entropy => uncertainty_select(scores, UncertaintyKind::Entropy, cfg),
        Method::Margin => uncertainty_select(scores, UncertaintyKind::Margin, cfg),
        Method::LeastConfidence => uncertainty_select(scores, UncertaintyKind::LeastConfidence, cfg),
        Method::Herding | Method::Kcenter => {
            let store = store.ok_or_else(|| Error::invalid(format!("{} needs trajectory embeddings", cfg.method)))?;
            let ids_match = store.records.len() == scores.rows.len()
                && store.records.iter().zip(&scores.rows).all(|(r, s)| r.sample_id == s.sample_id);
            if !ids_match {
                return Err(Error::invalid("score table and trajectory store cover different samples"));
            }
            let kind = if cfg.method == Method::Herding {
                GeometryKind::Herding
            } else {
                GeometryKind::KCenter
            };
            geometry_select(store, kind, cfg)
        }
    }
}
