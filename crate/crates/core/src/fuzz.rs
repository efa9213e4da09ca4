// SPDX-License-Identifier: Apache-2.0

//! A small deterministic mutational greybox fuzzer.
//!
//! The queue is cycled round-robin with a fixed energy per entry. Offspring
//! join the queue only when they cover a new edge; bug verdicts are recorded
//! once per label. Fuzzing always runs the uninstrumented program and budgets
//! are execution counts, so a report is a pure function of its inputs.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitSet;
use crate::guardlang::Edge;
use crate::instrument::InstrumentedProgram;
use crate::metrics::{a12, BugStat};
use crate::runtime::{execute_uninstrumented, par_map, Seed, DEFAULT_BUDGET};
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzConfig {
    /// Total executions, initial seeds included.
    pub executions: u64,
    pub rng_seed: u64,
    /// Interpreter steps per execution.
    pub step_budget: u64,
    /// Mutations per queue entry per cycle.
    pub energy: u32,
    pub max_input_len: usize,
    pub stop_on_first_crash: bool,
    /// Add wall-clock discovery times to crash records.
    pub record_wall: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            executions: 200_000,
            rng_seed: 0,
            step_budget: DEFAULT_BUDGET,
            energy: 64,
            max_input_len: 1024,
            stop_on_first_crash: false,
            record_wall: false,
        }
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub id: String,
    /// Queue id of the mutated parent; `None` for initial seeds.
    pub parent: Option<String>,
    /// Execution index at which the entry was found.
    pub exec_index: u64,
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashRecord {
    pub label: String,
    pub exec_index: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_us: Option<u64>,
    #[serde(with = "hex_bytes")]
    pub input: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub schema_version: u32,
    pub rng_seed: u64,
    pub executions: u64,
    pub queue: Vec<QueueEntry>,
    pub crashes: Vec<CrashRecord>,
    /// `(execution index, cumulative edges)` at every coverage increase.
    pub edge_timeline: Vec<(u64, usize)>,
    /// Edges of the base program covered by any execution.
    pub final_edges: Vec<Edge>,
}

impl FuzzReport {
    pub fn crash_labels(&self) -> BTreeSet<String> {
        self.crashes.iter().map(|c| c.label.clone()).collect()
    }

    pub fn first_crash(&self, label: &str) -> Option<u64> {
        self.crashes.iter().find(|c| c.label == label).map(|c| c.exec_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FuzzError {
    #[error("no initial seeds")]
    NoSeeds,
    #[error("candidate `{0}` is already in the base set")]
    CandidateInBase(String),
}

struct Campaign<'a> {
    ip: &'a InstrumentedProgram,
    cfg: &'a FuzzConfig,
    rng: ChaCha8Rng,
    queue: Vec<QueueEntry>,
    covered: BitSet,
    seen_labels: HashSet<String>,
    report_crashes: Vec<CrashRecord>,
    timeline: Vec<(u64, usize)>,
    execs: u64,
    started: Instant,
}

impl Campaign<'_> {
    /// Executes `bytes`; returns true if it covered a new edge and whether it
    /// hit a new bug label.
    fn exec(&mut self, bytes: &[u8]) -> (bool, bool) {
        let index = self.execs;
        self.execs += 1;
        let out = execute_uninstrumented(self.ip, &Seed::new("", bytes), self.cfg.step_budget);
        let fresh = out.edges.has_bits_outside(&self.covered);
        if fresh {
            self.covered.union_with(&out.edges);
            self.timeline.push((index, self.covered.count()));
        }
        let mut new_bug = false;
        if let Some(label) = out.verdict.bug_label() {
            if self.seen_labels.insert(label.to_string()) {
                new_bug = true;
                self.report_crashes.push(CrashRecord {
                    label: label.to_string(),
                    exec_index: index,
                    wall_us: self.cfg.record_wall.then(|| self.started.elapsed().as_micros() as u64),
                    input: bytes.to_vec(),
                });
            }
        }
        (fresh, new_bug)
    }

    fn mutate(&mut self, parent: usize) -> Vec<u8> {
        let mut b = self.queue[parent].bytes.clone();
        let op = self.rng.random_range(0..6);
        if op == 5 {
            let n = self.rng.random_range(1..=8);
            for _ in 0..n {
                let op = self.rng.random_range(0..5);
                self.apply(op, &mut b);
            }
        } else {
            self.apply(op, &mut b);
        }
        b.truncate(self.cfg.max_input_len);
        b
    }

    /// Operators needing an existing byte fall back to insertion on empty input.
    fn apply(&mut self, op: u32, b: &mut Vec<u8>) {
        let op = if b.is_empty() && matches!(op, 0 | 1 | 3) { 2 } else { op };
        match op {
            0 => {
                let i = self.rng.random_range(0..b.len());
                b[i] ^= 1 << self.rng.random_range(0..8);
            }
            1 => {
                let i = self.rng.random_range(0..b.len());
                b[i] = self.rng.random();
            }
            2 => {
                if b.len() < self.cfg.max_input_len {
                    let i = self.rng.random_range(0..=b.len());
                    b.insert(i, self.rng.random());
                }
            }
            3 => {
                let i = self.rng.random_range(0..b.len());
                b.remove(i);
            }
            _ => {
                let other = self.rng.random_range(0..self.queue.len());
                let tail = &self.queue[other].bytes;
                let i = self.rng.random_range(0..=b.len());
                let j = self.rng.random_range(0..=tail.len());
                b.truncate(i);
                b.extend_from_slice(&tail[j..]);
            }
        }
    }
}

/// Runs one campaign. Initial seeds with identical content are run once.
pub fn fuzz(ip: &InstrumentedProgram, seeds: &[Seed], cfg: &FuzzConfig) -> Result<FuzzReport, FuzzError> {
    if seeds.is_empty() {
        return Err(FuzzError::NoSeeds);
    }
    let mut c = Campaign {
        ip,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
        queue: Vec::new(),
        covered: BitSet::new(ip.base_cfg.edges.len()),
        seen_labels: HashSet::new(),
        report_crashes: Vec::new(),
        timeline: Vec::new(),
        execs: 0,
        started: Instant::now(),
    };
    let mut contents: HashSet<&[u8]> = HashSet::new();
    let mut stop = false;
    for s in seeds {
        if c.execs >= cfg.executions || stop {
            break;
        }
        if !contents.insert(&s.bytes) {
            continue;
        }
        let index = c.execs;
        let (_, bug) = c.exec(&s.bytes);
        c.queue.push(QueueEntry {
            id: s.id.clone(),
            parent: None,
            exec_index: index,
            bytes: s.bytes.to_vec(),
        });
        stop = bug && cfg.stop_on_first_crash;
    }
    'outer: while !stop && !c.queue.is_empty() {
        let mut qi = 0;
        while qi < c.queue.len() {
            for _ in 0..cfg.energy {
                if c.execs >= cfg.executions {
                    break 'outer;
                }
                let child = c.mutate(qi);
                let index = c.execs;
                let (fresh, bug) = c.exec(&child);
                if fresh {
                    c.queue.push(QueueEntry {
                        id: format!("x{index:08}"),
                        parent: Some(c.queue[qi].id.clone()),
                        exec_index: index,
                        bytes: child,
                    });
                }
                if bug && cfg.stop_on_first_crash {
                    break 'outer;
                }
            }
            qi += 1;
        }
        if cfg.energy == 0 {
            break;
        }
    }
    let final_edges = c.covered.iter().map(|i| ip.base_cfg.edges[i]).collect();
    Ok(FuzzReport {
        schema_version: SCHEMA_VERSION,
        rng_seed: cfg.rng_seed,
        executions: c.execs,
        queue: c.queue,
        crashes: c.report_crashes,
        edge_timeline: c.timeline,
        final_edges,
    })
}

/// Runs `fuzz` once per rng seed, data-parallel across trials.
pub fn fuzz_trials(
    ip: &InstrumentedProgram,
    seeds: &[Seed],
    cfg: &FuzzConfig,
    rng_seeds: &[u64],
) -> Result<Vec<FuzzReport>, FuzzError> {
    if seeds.is_empty() {
        return Err(FuzzError::NoSeeds);
    }
    par_map(rng_seeds, |&r| {
        let cfg = FuzzConfig {
            rng_seed: r,
            ..cfg.clone()
        };
        fuzz(ip, seeds, &cfg)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialDelta {
    pub rng_seed: u64,
    pub new_edges: Vec<Edge>,
    pub new_crashes: Vec<String>,
}

impl TrialDelta {
    pub fn is_empty(&self) -> bool {
        self.new_edges.is_empty() && self.new_crashes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub schema_version: u32,
    pub candidate: String,
    pub holds: bool,
    /// Trials whose augmented campaign found something the base one did not.
    pub improved_trials: usize,
    pub trials: Vec<TrialDelta>,
}

/// Fuzzes `base` and `base + candidate` with paired rng seeds. The relation
/// holds when the augmented campaign's findings (edges and bug labels) exceed
/// the base campaign's in a strict majority of trials.
pub fn seed_improvement(
    ip: &InstrumentedProgram,
    base: &[Seed],
    candidate: &Seed,
    cfg: &FuzzConfig,
    rng_seeds: &[u64],
) -> Result<ImprovementReport, FuzzError> {
    if base.iter().any(|s| s.id == candidate.id) {
        return Err(FuzzError::CandidateInBase(candidate.id.clone()));
    }
    if base.is_empty() {
        return Err(FuzzError::NoSeeds);
    }
    let mut augmented = base.to_vec();
    augmented.push(candidate.clone());
    let pairs: Vec<Result<TrialDelta, FuzzError>> = par_map(rng_seeds, |&r| {
        let cfg = FuzzConfig {
            rng_seed: r,
            ..cfg.clone()
        };
        let a = fuzz(ip, base, &cfg)?;
        let b = fuzz(ip, &augmented, &cfg)?;
        let a_edges: BTreeSet<Edge> = a.final_edges.iter().copied().collect();
        let a_labels = a.crash_labels();
        Ok(TrialDelta {
            rng_seed: r,
            new_edges: b.final_edges.iter().copied().filter(|e| !a_edges.contains(e)).collect(),
            new_crashes: b.crash_labels().difference(&a_labels).cloned().collect(),
        })
    });
    let trials: Vec<TrialDelta> = pairs.into_iter().collect::<Result<_, _>>()?;
    let improved = trials.iter().filter(|t| !t.is_empty()).count();
    Ok(ImprovementReport {
        schema_version: SCHEMA_VERSION,
        candidate: candidate.id.clone(),
        holds: improved * 2 > trials.len(),
        improved_trials: improved,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub name: String,
    pub seeds: Vec<String>,
    pub bugs: BTreeMap<String, BugStat>,
    /// Final edge count per trial, in rng-seed order.
    pub final_edges: Vec<usize>,
    pub mean_final_edges: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseA12 {
    pub a: String,
    pub b: String,
    pub final_edges: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub executions: u64,
    pub rng_seeds: Vec<u64>,
    pub sets: Vec<SetSummary>,
    pub a12: Vec<PairwiseA12>,
}

/// Fuzzes every named seed set over the same rng seeds and summarizes bugs and
/// coverage. Labels missed by a set still get a row (with zero discoveries)
/// when another set found them.
pub fn evaluate(
    ip: &InstrumentedProgram,
    sets: &[(String, Vec<Seed>)],
    cfg: &FuzzConfig,
    rng_seeds: &[u64],
) -> Result<EvalReport, FuzzError> {
    let mut reports = Vec::with_capacity(sets.len());
    for (_, seeds) in sets {
        reports.push(fuzz_trials(ip, seeds, cfg, rng_seeds)?);
    }
    let labels: BTreeSet<String> = reports.iter().flatten().flat_map(|r| r.crash_labels()).collect();
    let summaries: Vec<SetSummary> = sets
        .iter()
        .zip(&reports)
        .map(|((name, seeds), runs)| {
            let bugs = labels
                .iter()
                .map(|l| {
                    let hits: Vec<f64> = runs.iter().filter_map(|r| r.first_crash(l)).map(|x| x as f64).collect();
                    (l.clone(), BugStat::from_hits(&hits, runs.len()))
                })
                .collect();
            let final_edges: Vec<usize> = runs.iter().map(|r| r.final_edges.len()).collect();
            let mean = if final_edges.is_empty() {
                0.0
            } else {
                final_edges.iter().sum::<usize>() as f64 / final_edges.len() as f64
            };
            SetSummary {
                name: name.clone(),
                seeds: seeds.iter().map(|s| s.id.clone()).collect(),
                bugs,
                final_edges,
                mean_final_edges: mean,
            }
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..summaries.len() {
        for j in i + 1..summaries.len() {
            let f = |s: &SetSummary| s.final_edges.iter().map(|x| *x as f64).collect::<Vec<_>>();
            pairs.push(PairwiseA12 {
                a: summaries[i].name.clone(),
                b: summaries[j].name.clone(),
                final_edges: a12(&f(&summaries[i]), &f(&summaries[j])),
            });
        }
    }
    Ok(EvalReport {
        schema_version: SCHEMA_VERSION,
        executions: cfg.executions,
        rng_seeds: rng_seeds.to_vec(),
        sets: summaries,
        a12: pairs,
    })
}
