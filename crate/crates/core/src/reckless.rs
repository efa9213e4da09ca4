// SPDX-License-Identifier: Apache-2.0

//! Reckless-guard detection.
//!
//! Crashing-reckless guards are found by a windowed search over the disabling
//! order: windows double while probes stay clean and halve on a crash until a
//! single culprit is isolated. Converging-reckless guards are the disabled
//! guards whose true branch the newly selected seeds actually entered.

use std::collections::BTreeSet;

use log::warn;

use crate::guardlang::GuardId;
use crate::instrument::ToggleVector;
use crate::runtime::{Executor, RuntimeError, Seed};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CrashingReport {
    pub reckless: BTreeSet<GuardId>,
    /// Corpus executions at the probe budget, including the precondition check.
    pub probes: usize,
    /// Interpreter steps spent in probes.
    pub probe_steps: u64,
    /// Wall time spent in probes.
    pub probe_wall: std::time::Duration,
    /// Window adjustments made by the search.
    pub iterations: usize,
    /// False if the full disabled set did not crash at the probe budget.
    pub precondition_held: bool,
}

/// `g_minus` must be in disabling order, earliest first. Probes run the whole
/// corpus at `probe_budget`.
pub fn collect_crashing_reckless(
    ex: &Executor<'_>,
    corpus: &[Seed],
    g_minus: &[GuardId],
    probe_budget: u64,
) -> Result<CrashingReport, RuntimeError> {
    let mut rep = CrashingReport::default();
    let probe = |disabled: &[GuardId], rep: &mut CrashingReport| -> Result<bool, RuntimeError> {
        let tv = ToggleVector::with_disabled(ex.ip, disabled).expect("disabled guards are toggleable");
        let t = std::time::Instant::now();
        let run = ex.run(&tv, corpus, probe_budget)?;
        rep.probe_wall += t.elapsed();
        rep.probes += 1;
        rep.probe_steps += run.fresh_steps;
        Ok(run.result.is_crash())
    };
    if !probe(g_minus, &mut rep)? {
        warn!("disabled set does not crash at the probe budget; no crashing-reckless guards");
        return Ok(rep);
    }
    rep.precondition_held = true;

    let n = g_minus.len();
    let mut kept: Vec<GuardId> = Vec::new();
    // `pos` is the index of the last decided guard, -1 before the first
    let mut pos: isize = -1;
    let mut len: usize = 1;
    while ((pos + 1) as usize) < n {
        rep.iterations += 1;
        let lo = (pos + 1) as usize;
        let hi = (lo + len).min(n);
        let window = &g_minus[lo..hi];
        let mut trial = kept.clone();
        trial.extend_from_slice(window);
        if probe(&trial, &mut rep)? {
            if len == 1 {
                rep.reckless.insert(window[0]);
                pos += 1;
            } else {
                len /= 2;
            }
        } else {
            kept.extend_from_slice(window);
            pos += (hi - lo) as isize;
            len *= 2;
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConvergingReport {
    pub reckless: BTreeSet<GuardId>,
    pub steps: u64,
}

/// Disabled guards whose true branch some seed of `s_new` entered.
pub fn collect_converging_reckless(
    ex: &Executor<'_>,
    s_new: &[Seed],
    g_minus: &BTreeSet<GuardId>,
) -> Result<ConvergingReport, RuntimeError> {
    if g_minus.is_empty() {
        return Ok(ConvergingReport::default());
    }
    let tv = ToggleVector::with_disabled(ex.ip, g_minus).expect("disabled guards are toggleable");
    let run = ex.run_default(&tv, s_new)?;
    Ok(ConvergingReport {
        reckless: g_minus
            .iter()
            .copied()
            .filter(|g| run.branch_entered.contains(g.index()))
            .collect(),
        steps: run.fresh_steps,
    })
}
