// SPDX-License-Identifier: Apache-2.0

//! Evaluation metrics: fresh-seed ratio, Vargha-Delaney A12, bug success rate
//! and time-to-bug.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::fuzz::FuzzReport;

/// Ratio at round n: distinct seeds selected in rounds 1..=n over the total
/// number of selections in those rounds. `None` while nothing was selected.
pub fn fresh_seed_ratio<S: AsRef<str>>(rounds: &[Vec<S>]) -> Vec<Option<f64>> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut total = 0usize;
    rounds
        .iter()
        .map(|r| {
            total += r.len();
            seen.extend(r.iter().map(AsRef::as_ref));
            (total > 0).then(|| seen.len() as f64 / total as f64)
        })
        .collect()
}

/// Probability that a draw from `a` exceeds one from `b`, ties counted half.
pub fn a12(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let mut score = 0.0;
    for x in a {
        for y in b {
            if x > y {
                score += 1.0;
            } else if x == y {
                score += 0.5;
            }
        }
    }
    Some(score / (a.len() * b.len()) as f64)
}

/// Median; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugStat {
    pub discoveries: usize,
    pub repeats: usize,
    /// discoveries / repeats
    pub gamma: f64,
    /// Median discovery execution over the runs that found the bug.
    pub median_hit: Option<f64>,
    /// Median over all runs with misses treated as never; `None` when at least
    /// half the runs missed.
    pub median_censored: Option<f64>,
}

impl BugStat {
    pub fn from_hits(hits: &[f64], repeats: usize) -> BugStat {
        let mut all: Vec<f64> = hits.to_vec();
        all.resize(repeats.max(hits.len()), f64::INFINITY);
        let censored = median(&all).filter(|m| m.is_finite());
        BugStat {
            discoveries: hits.len(),
            repeats,
            gamma: if repeats == 0 {
                0.0
            } else {
                hits.len() as f64 / repeats as f64
            },
            median_hit: median(hits),
            median_censored: censored,
        }
    }
}

/// Per-label statistics over repeated fuzzing runs.
pub fn bug_stats(reports: &[FuzzReport]) -> BTreeMap<String, BugStat> {
    let mut hits: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in reports {
        for c in &r.crashes {
            hits.entry(c.label.clone()).or_default().push(c.exec_index as f64);
        }
    }
    hits.into_iter()
        .map(|(label, h)| (label, BugStat::from_hits(&h, reports.len())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn censored_median_needs_majority() {
        let s = BugStat::from_hits(&[10.0, 20.0], 4);
        assert_eq!(s.median_hit, Some(15.0));
        assert_eq!(s.median_censored, None);
        let s = BugStat::from_hits(&[10.0, 20.0, 30.0], 4);
        assert_eq!(s.median_censored, Some(25.0));
        assert_eq!(s.gamma, 0.75);
    }
}
