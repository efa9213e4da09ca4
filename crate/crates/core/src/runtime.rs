// SPDX-License-Identifier: Apache-2.0

//! Deterministic CFG interpreter with a step budget.
//!
//! Every op and every terminator costs one step; toggle tests are free so that
//! an all-off instrumented run spends exactly the steps of the base program.
//! Execution aborts with a timeout when a step is attempted past the budget.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitSet;
use crate::guardlang::ast::BinOp;
use crate::guardlang::cfg::{CExpr, Op, Terminator};
use crate::guardlang::{BlockId, Edge, GuardId, ProgramCfg};
use crate::instrument::{InstrumentedProgram, ToggleVector};

pub const DEFAULT_BUDGET: u64 = 100_000;
/// Budget multiplier for reckless probes.
pub const PROBE_FACTOR: u64 = 10;
/// Maximum call depth before a stack-overflow fault.
pub const MAX_CALL_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Seed {
    pub id: String,
    pub bytes: Arc<[u8]>,
}

impl Seed {
    pub fn new(id: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Seed {
            id: id.into(),
            bytes: bytes.into().into(),
        }
    }

    pub fn size(&self) -> usize {
        self.bytes.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    IndexOutOfBounds,
    DivisionByZero,
    ModuloByZero,
    StackOverflow,
}

impl std::fmt::Display for FaultKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FaultKind::IndexOutOfBounds => "index-out-of-bounds",
            FaultKind::DivisionByZero => "division-by-zero",
            FaultKind::ModuloByZero => "modulo-by-zero",
            FaultKind::StackOverflow => "stack-overflow",
        })
    }
}

/// How an execution ended. The derived order is the severity order
/// ok < bug < timeout < fault used to aggregate corpus runs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "detail", rename_all = "lowercase")]
pub enum Verdict {
    Ok,
    Bug(String),
    Timeout,
    Fault(FaultKind),
}

impl Verdict {
    /// Faults and timeouts: the breakage signal reckless detection reacts to.
    pub fn is_crash(&self) -> bool {
        matches!(self, Verdict::Fault(_) | Verdict::Timeout)
    }

    pub fn bug_label(&self) -> Option<&str> {
        match self {
            Verdict::Bug(l) => Some(l),
            _ => None,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Ok => f.write_str("ok"),
            Verdict::Bug(l) => write!(f, "bug({l})"),
            Verdict::Timeout => f.write_str("timeout"),
            Verdict::Fault(k) => write!(f, "fault({k})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExecOutcome {
    pub verdict: Verdict,
    /// Dense edge indices into `cfg.edges` of the executed program.
    pub edges: BitSet,
    /// Original condition evaluated true at least once.
    pub cond_sat: BitSet,
    /// True branch entered at least once, by condition or toggle.
    pub branch_entered: BitSet,
    pub steps: u64,
}

impl ExecOutcome {
    pub fn edge_list(&self, cfg: &ProgramCfg) -> Vec<Edge> {
        self.edges.iter().map(|i| cfg.edges[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("budget must be positive")]
    ZeroBudget,
}

/// Runs `seed` on the instrumented program under toggles `tv`.
pub fn execute(ip: &InstrumentedProgram, tv: &ToggleVector, seed: &Seed, budget: u64) -> ExecOutcome {
    run_cfg(&ip.cfg, Some(tv), seed, budget)
}

/// Runs `seed` on the base (uninstrumented) CFG.
pub fn execute_uninstrumented(ip: &InstrumentedProgram, seed: &Seed, budget: u64) -> ExecOutcome {
    run_cfg(&ip.base_cfg, None, seed, budget)
}

/// Interprets `cfg` directly. `toggles` of `None` treats every toggle as off.
pub fn run_cfg(cfg: &ProgramCfg, toggles: Option<&ToggleVector>, seed: &Seed, budget: u64) -> ExecOutcome {
    assert!(budget > 0, "budget must be positive");
    let guards = cfg.guard_blocks.len();
    let mut m = Machine {
        cfg,
        toggles,
        budget,
        steps: 0,
        depth: 0,
        edges: BitSet::new(cfg.edges.len()),
        cond_sat: BitSet::new(guards),
        branch_entered: BitSet::new(guards),
    };
    m.edges.insert(cfg.start_edge() as usize);
    let input = Value::Bytes(seed.bytes.clone());
    let verdict = match m.call(cfg.entry, vec![input]) {
        Ok(_) => Verdict::Ok,
        Err(Stop::Bug(label)) => Verdict::Bug(cfg.labels[label as usize].clone()),
        Err(Stop::Fault(k)) => Verdict::Fault(k),
        Err(Stop::Timeout) => Verdict::Timeout,
    };
    ExecOutcome {
        verdict,
        edges: m.edges,
        cond_sat: m.cond_sat,
        branch_entered: m.branch_entered,
        steps: m.steps,
    }
}

#[derive(Debug, Clone)]
enum Value {
    Int(i64),
    Bytes(Arc<[u8]>),
    Array(Vec<i64>),
}

impl Default for Value {
    fn default() -> Self {
        Value::Int(0)
    }
}

enum Stop {
    Bug(u32),
    Fault(FaultKind),
    Timeout,
}

impl From<FaultKind> for Stop {
    fn from(k: FaultKind) -> Self {
        Stop::Fault(k)
    }
}

struct Machine<'a> {
    cfg: &'a ProgramCfg,
    toggles: Option<&'a ToggleVector>,
    budget: u64,
    steps: u64,
    depth: usize,
    edges: BitSet,
    cond_sat: BitSet,
    branch_entered: BitSet,
}

impl Machine<'_> {
    #[inline]
    fn tick(&mut self) -> Result<(), Stop> {
        if self.steps >= self.budget {
            return Err(Stop::Timeout);
        }
        self.steps += 1;
        Ok(())
    }

    fn call(&mut self, func: usize, args: Vec<Value>) -> Result<i64, Stop> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Stop::Fault(FaultKind::StackOverflow));
        }
        self.depth += 1;
        let f = &self.cfg.functions[func];
        let mut locals = vec![Value::default(); f.slot_count as usize];
        for (slot, v) in f.param_slots.iter().zip(args) {
            locals[*slot as usize] = v;
        }
        let r = self.run(f.entry, &mut locals);
        self.depth -= 1;
        r
    }

    fn run(&mut self, entry: BlockId, locals: &mut [Value]) -> Result<i64, Stop> {
        let cfg = self.cfg;
        let mut cur = entry;
        loop {
            let block = cfg.block(cur);
            for op in &block.ops {
                self.tick()?;
                self.op(op, locals)?;
            }
            match &block.term {
                Terminator::Toggle { guard, on, off } => {
                    if self.toggles.is_some_and(|t| t.is_on(*guard)) {
                        self.tick()?;
                        // bookkeeping only: a faulting condition leaves cond_sat unset
                        if let Ok(v) = eval(cfg.guard_condition(*guard), locals) {
                            if v != 0 {
                                self.cond_sat.insert(guard.index());
                            }
                        }
                        self.branch_entered.insert(guard.index());
                        self.edges.insert(on.edge as usize);
                        cur = on.target;
                    } else {
                        self.edges.insert(off.edge as usize);
                        cur = off.target;
                    }
                }
                Terminator::Goto(j) => {
                    self.tick()?;
                    self.edges.insert(j.edge as usize);
                    cur = j.target;
                }
                Terminator::Branch {
                    guard,
                    cond,
                    then_,
                    else_,
                } => {
                    self.tick()?;
                    let j = if eval(cond, locals)? != 0 {
                        self.cond_sat.insert(guard.index());
                        self.branch_entered.insert(guard.index());
                        then_
                    } else {
                        else_
                    };
                    self.edges.insert(j.edge as usize);
                    cur = j.target;
                }
                Terminator::Return { value, exit } => {
                    self.tick()?;
                    let v = match value {
                        Some(e) => eval(e, locals)?,
                        None => 0,
                    };
                    if let Some(j) = exit {
                        self.edges.insert(j.edge as usize);
                        // the exit block of a function with a dedicated exit is empty
                        debug_assert!(cfg.block(j.target).ops.is_empty());
                    }
                    return Ok(v);
                }
                Terminator::Crash { label, edge } => {
                    self.tick()?;
                    self.edges.insert(*edge as usize);
                    return Err(Stop::Bug(*label));
                }
                Terminator::Exit => {
                    self.tick()?;
                    return Ok(0);
                }
            }
        }
    }

    fn op(&mut self, op: &Op, locals: &mut [Value]) -> Result<(), Stop> {
        match op {
            Op::Set { slot, value } => {
                let v = match value {
                    CExpr::Bytes(b) => Value::Bytes(b.clone()),
                    CExpr::Local(s) => locals[*s as usize].clone(),
                    e => Value::Int(eval(e, locals)?),
                };
                locals[*slot as usize] = v;
            }
            Op::InitArray { slot, init, size } => {
                let v = eval(init, locals)?;
                locals[*slot as usize] = Value::Array(vec![v; *size as usize]);
            }
            Op::Store { slot, index, value } => {
                let i = eval(index, locals)?;
                let v = eval(value, locals)?;
                match &mut locals[*slot as usize] {
                    Value::Array(a) => {
                        let cell = usize::try_from(i)
                            .ok()
                            .and_then(|i| a.get_mut(i))
                            .ok_or(FaultKind::IndexOutOfBounds)?;
                        *cell = v;
                    }
                    _ => unreachable!("store target is an array"),
                }
            }
            Op::Call { dst, func, args, edge } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(match a {
                        CExpr::Bytes(b) => Value::Bytes(b.clone()),
                        CExpr::Local(s) => match &locals[*s as usize] {
                            Value::Array(_) => unreachable!("arrays are not passed"),
                            v => v.clone(),
                        },
                        e => Value::Int(eval(e, locals)?),
                    });
                }
                self.edges.insert(*edge as usize);
                let r = self.call(*func, vals)?;
                if let Some(d) = dst {
                    locals[*d as usize] = Value::Int(r);
                }
            }
        }
        Ok(())
    }
}

fn bytes_of<'v>(e: &'v CExpr, locals: &'v [Value]) -> &'v [u8] {
    match e {
        CExpr::Bytes(b) => b,
        CExpr::Local(s) => match &locals[*s as usize] {
            Value::Bytes(b) => b,
            _ => unreachable!("type-checked byte string"),
        },
        _ => unreachable!("byte strings are literals or variables"),
    }
}

/// Integer evaluation. Conditions are side-effect free, so evaluation needs
/// only read access to the frame.
fn eval(e: &CExpr, locals: &[Value]) -> Result<i64, FaultKind> {
    Ok(match e {
        CExpr::Int(v) => *v,
        CExpr::Local(s) => match &locals[*s as usize] {
            Value::Int(v) => *v,
            _ => unreachable!("type-checked integer"),
        },
        CExpr::ByteAt(base, idx) => {
            let i = eval(idx, locals)?;
            let b = bytes_of(base, locals);
            usize::try_from(i)
                .ok()
                .and_then(|i| b.get(i))
                .map_or(0, |v| i64::from(*v))
        }
        CExpr::ArrayAt(slot, idx) => {
            let i = eval(idx, locals)?;
            match &locals[*slot as usize] {
                Value::Array(a) => *usize::try_from(i)
                    .ok()
                    .and_then(|i| a.get(i))
                    .ok_or(FaultKind::IndexOutOfBounds)?,
                _ => unreachable!("type-checked array"),
            }
        }
        CExpr::LenBytes(inner) => bytes_of(inner, locals).len() as i64,
        CExpr::Neg(inner) => eval(inner, locals)?.wrapping_neg(),
        CExpr::Not(inner) => i64::from(eval(inner, locals)? == 0),
        CExpr::Bin(op, l, r) => {
            let a = eval(l, locals)?;
            match op {
                BinOp::And => {
                    return Ok(if a == 0 { 0 } else { i64::from(eval(r, locals)? != 0) });
                }
                BinOp::Or => {
                    return Ok(if a != 0 { 1 } else { i64::from(eval(r, locals)? != 0) });
                }
                _ => {}
            }
            let b = eval(r, locals)?;
            match op {
                BinOp::Add => a.wrapping_add(b),
                BinOp::Sub => a.wrapping_sub(b),
                BinOp::Mul => a.wrapping_mul(b),
                BinOp::Div => {
                    if b == 0 {
                        return Err(FaultKind::DivisionByZero);
                    }
                    a.wrapping_div(b)
                }
                BinOp::Rem => {
                    if b == 0 {
                        return Err(FaultKind::ModuloByZero);
                    }
                    a.wrapping_rem(b)
                }
                BinOp::Eq => i64::from(a == b),
                BinOp::Ne => i64::from(a != b),
                BinOp::Lt => i64::from(a < b),
                BinOp::Le => i64::from(a <= b),
                BinOp::Gt => i64::from(a > b),
                BinOp::Ge => i64::from(a >= b),
                BinOp::And | BinOp::Or => unreachable!(),
            }
        }
        CExpr::Bytes(_) => unreachable!("byte string in integer context"),
    })
}

/// Per-seed outcomes plus their merges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusRun {
    pub outcomes: Vec<Arc<ExecOutcome>>,
    pub edges: BitSet,
    pub cond_sat: BitSet,
    pub branch_entered: BitSet,
    /// Worst verdict.
    pub result: Verdict,
    /// Steps of executions actually performed (cache hits cost nothing).
    pub fresh_steps: u64,
}

impl CorpusRun {
    fn merge(outcomes: Vec<(Arc<ExecOutcome>, bool)>) -> CorpusRun {
        let first = &outcomes[0].0;
        let mut run = CorpusRun {
            edges: BitSet::new(first.edges.capacity()),
            cond_sat: BitSet::new(first.cond_sat.capacity()),
            branch_entered: BitSet::new(first.branch_entered.capacity()),
            result: Verdict::Ok,
            fresh_steps: 0,
            outcomes: Vec::with_capacity(outcomes.len()),
        };
        for (o, fresh) in outcomes {
            run.edges.union_with(&o.edges);
            run.cond_sat.union_with(&o.cond_sat);
            run.branch_entered.union_with(&o.branch_entered);
            if o.verdict > run.result {
                run.result = o.verdict.clone();
            }
            if fresh {
                run.fresh_steps += o.steps;
            }
            run.outcomes.push(o);
        }
        run
    }
}

/// Runs every seed, in parallel when the `parallel` feature is on.
pub fn execute_corpus(
    ip: &InstrumentedProgram,
    tv: &ToggleVector,
    corpus: &[Seed],
    budget: u64,
) -> Result<CorpusRun, RuntimeError> {
    Executor::new(ip, budget).uncached().run(tv, corpus, budget)
}

/// Same as [`execute_corpus`] but always on the calling thread.
pub fn execute_corpus_sequential(
    ip: &InstrumentedProgram,
    tv: &ToggleVector,
    corpus: &[Seed],
    budget: u64,
) -> Result<CorpusRun, RuntimeError> {
    let mut ex = Executor::new(ip, budget).uncached();
    ex.parallel = false;
    ex.run(tv, corpus, budget)
}

type CacheKey = (String, ToggleVector, u64);

/// Batch executor with an optional outcome cache keyed by
/// (seed id, toggle vector, budget). Seed ids must identify content.
pub struct Executor<'a> {
    pub ip: &'a InstrumentedProgram,
    pub budget: u64,
    parallel: bool,
    cache: Option<Mutex<HashMap<CacheKey, Arc<ExecOutcome>>>>,
}

impl<'a> Executor<'a> {
    pub fn new(ip: &'a InstrumentedProgram, budget: u64) -> Self {
        Executor {
            ip,
            budget,
            parallel: cfg!(feature = "parallel"),
            cache: Some(Mutex::new(HashMap::new())),
        }
    }

    pub fn uncached(mut self) -> Self {
        self.cache = None;
        self
    }

    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }

    /// Runs `corpus` at the executor's default budget.
    pub fn run_default(&self, tv: &ToggleVector, corpus: &[Seed]) -> Result<CorpusRun, RuntimeError> {
        self.run(tv, corpus, self.budget)
    }

    pub fn run(&self, tv: &ToggleVector, corpus: &[Seed], budget: u64) -> Result<CorpusRun, RuntimeError> {
        if corpus.is_empty() {
            return Err(RuntimeError::EmptyCorpus);
        }
        if budget == 0 {
            return Err(RuntimeError::ZeroBudget);
        }
        let one = |s: &Seed| self.one(tv, s, budget);
        let outcomes: Vec<(Arc<ExecOutcome>, bool)> = if self.parallel {
            par_map(corpus, one)
        } else {
            corpus.iter().map(one).collect()
        };
        Ok(CorpusRun::merge(outcomes))
    }

    fn one(&self, tv: &ToggleVector, seed: &Seed, budget: u64) -> (Arc<ExecOutcome>, bool) {
        let Some(cache) = &self.cache else {
            return (Arc::new(execute(self.ip, tv, seed, budget)), true);
        };
        let key = (seed.id.clone(), tv.clone(), budget);
        if let Some(hit) = cache.lock().expect("cache lock").get(&key) {
            return (hit.clone(), false);
        }
        let o = Arc::new(execute(self.ip, tv, seed, budget));
        cache.lock().expect("cache lock").insert(key, o.clone());
        (o, true)
    }
}

/// Maps `f` over `items`, data-parallel when the `parallel` feature is on.
/// Output order follows input order either way.
#[cfg(feature = "parallel")]
pub fn par_map<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    F: Fn(&I) -> T,
{
    items.iter().map(f).collect()
}

/// Convenience: guard ids set in a bitmap.
pub fn guards_of(bits: &BitSet) -> Vec<GuardId> {
    bits.iter().map(|i| GuardId(i as u32)).collect()
}
