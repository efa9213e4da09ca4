// SPDX-License-Identifier: Apache-2.0

//! Iterative guard-toggling seed selection.
//!
//! Each round minimizes the full corpus under the current disabled set. A
//! faulting or timing-out round triggers the crashing-reckless search; a round
//! whose selection equals the previous one triggers the converging-reckless
//! check. Reckless guards are re-enabled for good. Otherwise the selection is
//! accumulated, freshly passed guards are disabled, and when none exist the
//! outermost enabled guards below the disabled frontier are disabled instead.
//! The loop stops at the fixed point: unchanged selection, no reckless guards
//! this round, nothing passed, nothing outermost.

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use log::{debug, info};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guardlang::GuardId;
use crate::hierarchy::collect_outermost;
use crate::instrument::{extract_hierarchy, InstrumentedProgram, ToggleVector};
use crate::ledger::CategoryCosts;
use crate::minimize::cmin_with;
use crate::reckless::{collect_converging_reckless, collect_crashing_reckless};
use crate::runtime::{Executor, RuntimeError, Seed, Verdict, DEFAULT_BUDGET, PROBE_FACTOR};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectConfig {
    /// Interpreter steps per execution.
    pub budget: u64,
    /// Probe budget multiplier for the crashing-reckless search.
    pub probe_factor: u64,
    pub max_rounds: u64,
    #[serde(with = "secs")]
    pub wall_budget: Duration,
    /// Record wall-clock costs next to work units.
    pub record_wall: bool,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_secs())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_secs)
    }
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            budget: DEFAULT_BUDGET,
            probe_factor: PROBE_FACTOR,
            max_rounds: 10_000,
            wall_budget: Duration::from_secs(2 * 60 * 60),
            record_wall: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    FixedPoint,
    MaxRounds,
    WallBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecklessCheck {
    None,
    Crashing,
    Converging,
}

/// The four conjuncts of the fixed-point condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointCheck {
    pub selection_converged: bool,
    pub no_reckless: bool,
    pub no_passed: bool,
    pub no_outermost: bool,
    pub reached: bool,
}

pub fn check_fixed_point(
    s_prime: &BTreeSet<usize>,
    s_new: &BTreeSet<usize>,
    passed: &BTreeSet<GuardId>,
    outermost: &BTreeSet<GuardId>,
    reckless: &BTreeSet<GuardId>,
) -> FixedPointCheck {
    let selection_converged = s_prime == s_new;
    let no_reckless = reckless.is_empty();
    let no_passed = passed.is_empty();
    let no_outermost = outermost.is_empty();
    FixedPointCheck {
        selection_converged,
        no_reckless,
        no_passed,
        no_outermost,
        reached: selection_converged && no_reckless && no_passed && no_outermost,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    /// Disabled guards during this round's minimization.
    pub disabled: Vec<GuardId>,
    /// This round's minimizer output.
    pub selected: Vec<String>,
    pub s_begin: Vec<String>,
    pub s_end: Vec<String>,
    pub s_increment: Vec<String>,
    pub aggregate: Verdict,
    pub reckless_check: RecklessCheck,
    pub probes: usize,
    pub newly_reckless: Vec<GuardId>,
    /// Freshly passed guards (passed, not reckless, not already disabled).
    pub passed: Vec<GuardId>,
    pub outermost: Vec<GuardId>,
    pub newly_disabled: Vec<GuardId>,
    pub fixed_point: FixedPointCheck,
    pub work: CategoryCosts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ns: Option<CategoryCosts>,
}

/// Working sets of the selection loop.
#[derive(Debug, Clone, Default)]
pub struct SelectionState {
    /// Accumulated selection (corpus indices).
    pub s: BTreeSet<usize>,
    /// Selection of the last round that accumulated.
    pub s_prime: BTreeSet<usize>,
    /// Sticky reckless set.
    pub r: BTreeSet<GuardId>,
    /// Disabled guards in disabling order.
    pub g_minus: Vec<GuardId>,
    pub o_new: BTreeSet<GuardId>,
    pub round: u64,
    pub trace: Vec<RoundRecord>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    /// Final selection, corpus indices ascending.
    pub selected: Vec<usize>,
    /// Minimizer output with every toggle off.
    pub baseline: Vec<usize>,
    /// Seeds selected beyond the baseline.
    pub delta: Vec<usize>,
    pub trace: Vec<RoundRecord>,
    pub termination: Termination,
    pub disabled: Vec<GuardId>,
    pub reckless: Vec<GuardId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("duplicate seed id `{0}`")]
    DuplicateSeed(String),
    #[error("baseline run faults or times out on: {}", list(.0))]
    Baseline(Vec<(String, Verdict)>),
}

fn list(v: &[(String, Verdict)]) -> String {
    v.iter()
        .map(|(id, verdict)| format!("{id} ({verdict})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl From<RuntimeError> for SelectError {
    fn from(e: RuntimeError) -> Self {
        match e {
            RuntimeError::EmptyCorpus => SelectError::EmptyCorpus,
            RuntimeError::ZeroBudget => unreachable!("budget validated by caller"),
        }
    }
}

/// Wall-clock accumulator that is a no-op unless enabled.
struct Stopwatch {
    on: bool,
    at: Instant,
}

impl Stopwatch {
    fn start(on: bool) -> Self {
        Stopwatch { on, at: Instant::now() }
    }

    fn lap(&mut self) -> u64 {
        if !self.on {
            return 0;
        }
        let now = Instant::now();
        let d = now.duration_since(self.at).as_nanos() as u64;
        self.at = now;
        d
    }
}

pub fn select(ip: &InstrumentedProgram, corpus: &[Seed], cfg: &SelectConfig) -> Result<Selection, SelectError> {
    if corpus.is_empty() {
        return Err(SelectError::EmptyCorpus);
    }
    let mut ids = HashSet::new();
    for s in corpus {
        if !ids.insert(s.id.as_str()) {
            return Err(SelectError::DuplicateSeed(s.id.clone()));
        }
    }
    let budget = cfg.budget.max(1);
    let probe_budget = budget.saturating_mul(cfg.probe_factor.max(1));
    let ex = Executor::new(ip, budget);
    let started = Instant::now();

    let all_off = ToggleVector::all_off(ip);
    let base = cmin_with(&ex, &all_off, corpus)?;
    let broken: Vec<(String, Verdict)> = corpus
        .iter()
        .zip(&base.run.outcomes)
        .filter(|(_, o)| o.verdict.is_crash())
        .map(|(s, o)| (s.id.clone(), o.verdict.clone()))
        .collect();
    if !broken.is_empty() {
        return Err(SelectError::Baseline(broken));
    }

    let mut h = extract_hierarchy(ip);
    let mut st = SelectionState::default();
    let ids_of = |set: &BTreeSet<usize>| -> Vec<String> { set.iter().map(|i| corpus[*i].id.clone()).collect() };

    let termination = loop {
        st.round += 1;
        let mut work = CategoryCosts::default();
        let mut wall = CategoryCosts::default();
        let round_start = Instant::now();
        let mut sw = Stopwatch::start(cfg.record_wall);
        if st.round == 1 {
            // one unit per guard for building the hierarchy
            work.hierarchy += ip.guard_count() as u64;
        }

        let disabled_now = st.g_minus.clone();
        let tv = ToggleVector::with_disabled(ip, &disabled_now).expect("disabled guards are toggleable");
        let cm = cmin_with(&ex, &tv, corpus)?;
        work.base_cmin += cm.run.fresh_steps + corpus.len() as u64;
        wall.base_cmin += sw.lap();

        let s_new: BTreeSet<usize> = cm.selected.iter().copied().collect();
        let converged = st.s_prime == s_new;
        let s_begin = st.s.clone();

        let mut check = RecklessCheck::None;
        let mut probes = 0;
        let mut r_round: BTreeSet<GuardId> = BTreeSet::new();
        if cm.result.is_crash() {
            check = RecklessCheck::Crashing;
            let rep = collect_crashing_reckless(&ex, corpus, &st.g_minus, probe_budget)?;
            probes = rep.probes;
            work.crashing_probe += rep.probe_steps;
            work.crashing += rep.probe_steps + rep.iterations as u64 + 1;
            wall.crashing += sw.lap();
            if cfg.record_wall {
                wall.crashing_probe = (rep.probe_wall.as_nanos() as u64).min(wall.crashing);
            }
            r_round = rep.reckless;
        } else if converged {
            check = RecklessCheck::Converging;
            let seeds: Vec<Seed> = s_new.iter().map(|i| corpus[*i].clone()).collect();
            let g_set: BTreeSet<GuardId> = st.g_minus.iter().copied().collect();
            let rep = collect_converging_reckless(&ex, &seeds, &g_set)?;
            work.converging += rep.steps + g_set.len() as u64;
            wall.converging += sw.lap();
            r_round = rep.reckless;
        }

        let mut passed: BTreeSet<GuardId> = BTreeSet::new();
        let mut outermost: BTreeSet<GuardId> = BTreeSet::new();
        let mut newly_disabled: Vec<GuardId> = Vec::new();
        if !r_round.is_empty() {
            st.r.extend(r_round.iter().copied());
            st.g_minus.retain(|g| !st.r.contains(g));
            work.guard_ops += r_round.len() as u64;
        } else {
            st.s.extend(s_new.iter().copied());
            st.s_prime = s_new.clone();
            let disabled: BTreeSet<GuardId> = st.g_minus.iter().copied().collect();
            passed = cm
                .passed
                .iter()
                .map(|i| GuardId(i as u32))
                .filter(|g| h.contains(*g) && !st.r.contains(g) && !disabled.contains(g))
                .collect();
            work.guard_ops += cm.passed.count() as u64;
            if !passed.is_empty() {
                newly_disabled.extend(passed.iter().copied());
                st.o_new.extend(passed.iter().copied());
            } else {
                h.set_disabled(&st.g_minus);
                wall.guard_ops += sw.lap();
                let om = collect_outermost(&h, &st.o_new);
                work.hierarchy += om.visited as u64;
                wall.hierarchy += sw.lap();
                outermost = om.guards.into_iter().filter(|g| !st.r.contains(g)).collect();
                if !outermost.is_empty() {
                    newly_disabled.extend(outermost.iter().copied());
                    st.o_new = outermost.clone();
                }
            }
            st.g_minus.extend(newly_disabled.iter().copied());
            work.guard_ops += newly_disabled.len() as u64;
        }
        h.set_disabled(&st.g_minus);
        work.guard_ops += 1;

        let fp = check_fixed_point(&st.s_prime, &s_new, &passed, &outermost, &r_round);
        // `s_prime` was just updated on accumulating rounds, so compare against
        // the value the round started with
        let fp = FixedPointCheck {
            selection_converged: converged,
            reached: converged && fp.no_reckless && fp.no_passed && fp.no_outermost,
            ..fp
        };

        if cfg.record_wall {
            let total = round_start.elapsed().as_nanos() as u64;
            let others = wall.base_cmin + wall.crashing + wall.converging + wall.hierarchy;
            wall.guard_ops = total.saturating_sub(others);
        }

        let s_end = st.s.clone();
        let record = RoundRecord {
            round: st.round,
            disabled: disabled_now,
            selected: ids_of(&s_new),
            s_begin: ids_of(&s_begin),
            s_end: ids_of(&s_end),
            s_increment: ids_of(&s_end.difference(&s_begin).copied().collect()),
            aggregate: cm.result.clone(),
            reckless_check: check,
            probes,
            newly_reckless: r_round.iter().copied().collect(),
            passed: passed.iter().copied().collect(),
            outermost: outermost.iter().copied().collect(),
            newly_disabled,
            fixed_point: fp,
            work,
            wall_ns: cfg.record_wall.then_some(wall),
        };
        debug!("round {}: {:?}", st.round, record);
        st.trace.push(record);

        if fp.reached {
            break Termination::FixedPoint;
        }
        if st.round >= cfg.max_rounds {
            break Termination::MaxRounds;
        }
        if started.elapsed() >= cfg.wall_budget {
            break Termination::WallBudget;
        }
    };
    info!(
        "selection finished after {} rounds ({:?}): {} seeds",
        st.round,
        termination,
        st.s.len()
    );

    let baseline: Vec<usize> = base.selected.clone();
    let selected: Vec<usize> = st.s.iter().copied().collect();
    let base_set: BTreeSet<usize> = baseline.iter().copied().collect();
    Ok(Selection {
        delta: selected.iter().copied().filter(|i| !base_set.contains(i)).collect(),
        selected,
        baseline,
        trace: st.trace,
        termination,
        disabled: st.g_minus,
        reckless: st.r.into_iter().collect(),
    })
}
