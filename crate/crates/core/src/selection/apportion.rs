//! Largest-remainder apportionment and the per-group budget plan.

use std::collections::BTreeMap;

use super::{PoolEntry, SelectionConfig};
use crate::error::{Error, Result};

/// Splits `total` into integer parts proportional to `weights` (Hamilton's
/// method). Leftover units go to the largest fractional remainders, ties to
/// the lower index. Zero total weight yields all zeros.
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    // The tolerance absorbs products like 0.7 * 10 = 6.999...
    let mut parts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    let rem = |k: usize| quotas[k] - parts[k] as f64;
    order.sort_by(|&a, &b| rem(b).total_cmp(&rem(a)).then(a.cmp(&b)));
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        parts[k] += 1;
    }
    parts
}

/// Total coreset size for a pool of `n` samples.
pub fn total_budget(rate: f64, n: usize) -> usize {
    (rate * n as f64).round() as usize
}

/// A stratum of the pool that is selected from independently.
#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub label: Option<usize>,
    pub snr_db: Option<i32>,
    /// Pool positions, in ascending sample_id order.
    pub members: Vec<usize>,
    pub budget: usize,
}

impl Group {
    /// Stable index for seeding per-group random draws.
    pub fn seed_words(&self) -> [u64; 2] {
        [
            self.label.map_or(u64::MAX, |l| l as u64),
            self.snr_db.map_or(u64::MAX, |s| s as i64 as u64),
        ]
    }
}

/// Partitions the pool into groups and assigns each its budget: equal
/// shares per class when class-balanced, then proportional shares per SNR
/// bin when SNR-stratified.
pub fn plan_groups(pool: &[PoolEntry], cfg: &SelectionConfig) -> Result<Vec<Group>> {
    cfg.validate()?;
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by_key(|&k| pool[k].sample_id);
    if order.windows(2).any(|w| pool[w[0]].sample_id == pool[w[1]].sample_id) {
        return Err(Error::invalid("pool has duplicate sample ids"));
    }
    let total = total_budget(cfg.rate, pool.len());

    let mut by_class: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
    for &k in &order {
        let key = cfg.class_balanced.then_some(pool[k].label);
        by_class.entry(key).or_default().push(k);
    }
    if cfg.class_balanced && total < by_class.len() {
        return Err(Error::invalid(format!(
            "budget {total} is smaller than the number of classes {}",
            by_class.len()
        )));
    }
    if total == 0 {
        return Err(Error::invalid("rate selects no samples"));
    }
    let shares = apportion(total, &vec![1.0; by_class.len()]);

    let mut groups = Vec::new();
    for ((label, members), share) in by_class.into_iter().zip(shares) {
        if share > members.len() {
            return Err(Error::InsufficientSamples {
                group: label.unwrap_or(0),
                needed: share,
                available: members.len(),
            });
        }
        if !cfg.snr_stratified {
            groups.push(Group {
                label,
                snr_db: None,
                members,
                budget: share,
            });
            continue;
        }
        let mut bins: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for k in members {
            bins.entry(pool[k].snr_db).or_default().push(k);
        }
        let sizes: Vec<f64> = bins.values().map(|b| b.len() as f64).collect();
        for ((snr, members), budget) in bins.into_iter().zip(apportion(share, &sizes)) {
            groups.push(Group {
                label,
                snr_db: Some(snr),
                members,
                budget,
            });
        }
    }
    Ok(groups)
}
