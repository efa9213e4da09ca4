// SPDX-License-Identifier: Apache-2.0

//! Greedy edge-coverage corpus minimization in the style of afl-cmin.

use std::sync::Arc;

use crate::bits::BitSet;
use crate::instrument::{InstrumentedProgram, ToggleVector};
use crate::runtime::{CorpusRun, ExecOutcome, Executor, RuntimeError, Seed, Verdict};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CminResult {
    /// Indices into the corpus, ascending.
    pub selected: Vec<usize>,
    /// Guards whose condition held for some selected seed.
    pub passed: BitSet,
    /// Worst verdict over the whole corpus.
    pub result: Verdict,
    pub run: CorpusRun,
}

impl CminResult {
    pub fn selected_seeds<'c>(&self, corpus: &'c [Seed]) -> Vec<&'c Seed> {
        self.selected.iter().map(|i| &corpus[*i]).collect()
    }
}

pub fn cmin(
    ip: &InstrumentedProgram,
    tv: &ToggleVector,
    corpus: &[Seed],
    budget: u64,
) -> Result<CminResult, RuntimeError> {
    cmin_with(&Executor::new(ip, budget), tv, corpus)
}

/// [`cmin`] through a shared executor, reusing its outcome cache.
pub fn cmin_with(ex: &Executor<'_>, tv: &ToggleVector, corpus: &[Seed]) -> Result<CminResult, RuntimeError> {
    let run = ex.run_default(tv, corpus)?;
    let selected = greedy_cover(corpus, &run.outcomes);
    let mut passed = BitSet::new(ex.ip.guard_count());
    for &i in &selected {
        passed.union_with(&run.outcomes[i].cond_sat);
    }
    Ok(CminResult {
        selected,
        passed,
        result: run.result.clone(),
        run,
    })
}

/// For each edge in index order (the sorted edge order) not yet covered, picks
/// the covering seed with the smallest size, ties to the smallest id.
pub fn greedy_cover(corpus: &[Seed], outcomes: &[Arc<ExecOutcome>]) -> Vec<usize> {
    assert_eq!(corpus.len(), outcomes.len());
    if corpus.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by(|&a, &b| {
        corpus[a]
            .size()
            .cmp(&corpus[b].size())
            .then_with(|| corpus[a].id.cmp(&corpus[b].id))
    });
    let mut all = BitSet::new(outcomes[0].edges.capacity());
    for o in outcomes {
        all.union_with(&o.edges);
    }
    let mut covered = BitSet::new(all.capacity());
    let mut chosen = vec![false; corpus.len()];
    for e in all.iter() {
        if covered.contains(e) {
            continue;
        }
        let pick = *order
            .iter()
            .find(|&&i| outcomes[i].edges.contains(e))
            .expect("some seed covers every merged edge");
        chosen[pick] = true;
        covered.union_with(&outcomes[pick].edges);
    }
    chosen.iter().enumerate().filter(|(_, c)| **c).map(|(i, _)| i).collect()
}
