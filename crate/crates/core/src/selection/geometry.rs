//! Embedding-space selectors.

use super::apportion::Group;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean(points: &[&[f64]], members: &[usize]) -> Vec<f64> {
    let dim = points[members[0]].len();
    let mut mu = vec![0.0; dim];
    for &k in members {
        for (m, v) in mu.iter_mut().zip(points[k]) {
            *m += v;
        }
    }
    let n = members.len() as f64;
    mu.iter_mut().for_each(|m| *m /= n);
    mu
}

/// Greedy mean matching: repeatedly adds the member that brings the mean of
/// the selection closest to the group mean. `members` must be in ascending
/// id order; ties go to the earlier member.
pub fn herding(points: &[&[f64]], group: &Group) -> Vec<usize> {
    let members = &group.members;
    if members.is_empty() || group.budget == 0 {
        return Vec::new();
    }
    let mu = mean(points, members);
    let dim = mu.len();
    let mut sum = vec![0.0; dim];
    let mut taken = vec![false; members.len()];
    let mut chosen = Vec::with_capacity(group.budget);
    let mut cand = vec![0.0; dim];
    for step in 0..group.budget {
        let k1 = (step + 1) as f64;
        let mut best: Option<(usize, f64)> = None;
        for (j, &m) in members.iter().enumerate() {
            if taken[j] {
                continue;
            }
            for ((c, s), x) in cand.iter_mut().zip(&sum).zip(points[m]) {
                *c = (s + x) / k1;
            }
            let d = sq_dist(&mu, &cand);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, _) = best.expect("budget within group size");
        taken[j] = true;
        for (s, x) in sum.iter_mut().zip(points[members[j]]) {
            *s += x;
        }
        chosen.push(members[j]);
    }
    chosen
}

/// Farthest-first traversal seeded at the member nearest the group mean.
pub fn k_center(points: &[&[f64]], group: &Group) -> Vec<usize> {
    let members = &group.members;
    if members.is_empty() || group.budget == 0 {
        return Vec::new();
    }
    let mu = mean(points, members);
    let mut start = 0;
    let mut start_d = f64::INFINITY;
    for (j, &m) in members.iter().enumerate() {
        let d = sq_dist(&mu, points[m]);
        if d < start_d {
            start_d = d;
            start = j;
        }
    }
    let mut taken = vec![false; members.len()];
    let mut nearest = vec![f64::INFINITY; members.len()];
    let mut chosen = Vec::with_capacity(group.budget);
    let mut next = start;
    loop {
        taken[next] = true;
        chosen.push(members[next]);
        if chosen.len() == group.budget {
            break;
        }
        let c = points[members[next]];
        let mut best: Option<(usize, f64)> = None;
        for (j, &m) in members.iter().enumerate() {
            let d = sq_dist(c, points[m]);
            if d < nearest[j] {
                nearest[j] = d;
            }
            if !taken[j] && best.is_none_or(|(_, bd)| nearest[j] > bd) {
                best = Some((j, nearest[j]));
            }
        }
        next = best.expect("budget within group size").0;
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(n: usize, budget: usize) -> Group {
        Group {
            label: Some(0),
            snr_db: None,
            members: (0..n).collect(),
            budget,
        }
    }

    #[test]
    fn kcenter_collinear() {
        let pts = [[0.0], [1.0], [10.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let mut got = k_center(&refs, &group(3, 2));
        got.sort();
        assert_eq!(got, vec![1, 2]);
    }

    #[test]
    fn herding_picks_the_mean() {
        let pts = [[-1.0], [0.0], [1.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        assert_eq!(herding(&refs, &group(3, 1)), vec![1]);
    }

    #[test]
    fn exhaustion_returns_everything() {
        let pts = [[0.0, 1.0], [2.0, 2.0], [5.0, -1.0], [0.0, 1.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        for f in [herding, k_center] {
            let mut got = f(&refs, &group(4, 4));
            got.sort();
            assert_eq!(got, vec![0, 1, 2, 3]);
        }
    }
}
