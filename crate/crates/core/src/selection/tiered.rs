//! Three-tier proportional sampling on the combined score.

use rand::seq::index::sample;

use super::apportion::{apportion, Group};
use super::TierDraw;
use crate::rng::{derive_seed, rng_from_seed, tag};
use crate::scoring::ScoreRow;

/// Sizes of three contiguous rank tiers over `n` items, as equal as
/// possible with the remainder going to the earlier tiers.
pub fn tier_sizes(n: usize) -> [usize; 3] {
    let base = n / 3;
    let extra = n % 3;
    [0, 1, 2].map(|i| base + usize::from(i < extra))
}

/// Per-tier draw counts: largest-remainder quotas, with any shortfall in a
/// tier moved to the next lower tier and finally wrapped back to the top.
pub fn tier_quotas(budget: usize, sizes: [usize; 3], proportions: [f64; 3]) -> [usize; 3] {
    let q = apportion(budget, &proportions);
    let mut draws = [0usize; 3];
    let mut carry = 0;
    for i in 0..3 {
        let want = q[i] + carry;
        draws[i] = want.min(sizes[i]);
        carry = want - draws[i];
    }
    for i in 0..3 {
        let extra = carry.min(sizes[i] - draws[i]);
        draws[i] += extra;
        carry -= extra;
    }
    debug_assert_eq!(carry, 0, "budget exceeds pool");
    draws
}

/// Ranks `members` (positions into `rows`) by score descending, id
/// ascending.
pub fn rank_by_score(rows: &[ScoreRow], members: &[usize]) -> Vec<usize> {
    let mut ranked = members.to_vec();
    ranked.sort_by(|&a, &b| {
        rows[b]
            .s_foqus
            .total_cmp(&rows[a].s_foqus)
            .then(rows[a].sample_id.cmp(&rows[b].sample_id))
    });
    ranked
}

/// Selects from one group; returns chosen row positions and the draw record.
pub(super) fn select_group(
    rows: &[ScoreRow],
    group: &Group,
    proportions: [f64; 3],
    seed: u64,
) -> (Vec<usize>, TierDraw) {
    let ranked = rank_by_score(rows, &group.members);
    let sizes = tier_sizes(ranked.len());
    let draws = tier_quotas(group.budget, sizes, proportions);
    let mut rng = rng_from_seed(derive_seed(seed, &[tag("tier"), group.seed_words()[0], group.seed_words()[1]]));
    let mut chosen = Vec::with_capacity(group.budget);
    let mut start = 0;
    for i in 0..3 {
        let tier = &ranked[start..start + sizes[i]];
        for pos in sample(&mut rng, tier.len(), draws[i]) {
            chosen.push(tier[pos]);
        }
        start += sizes[i];
    }
    (
        chosen,
        TierDraw {
            label: group.label,
            snr_db: group.snr_db,
            tier_sizes: sizes,
            draws,
        },
    )
}
