// SPDX-License-Identifier: Apache-2.0

//! Toggle insertion and guard-hierarchy extraction.
//!
//! A toggle turns a guard's condition `c` into `tog || c`. In the CFG this is
//! a new block: the guard's original block ends in a [`Terminator::Toggle`]
//! that either jumps straight into the guarded branch (toggle on) or falls
//! through to an instrumentation-only block holding the original branch.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitSet;
use crate::guardlang::ast::{Stmt, StmtKind};
use crate::guardlang::cfg::{Block, Jump, Terminator};
use crate::guardlang::{self, BlockId, Edge, GuardId, GuardKind, GuardSite, Program, ProgramCfg};

#[derive(Debug, Clone)]
pub struct InstrumentedProgram {
    pub base: Program,
    pub base_cfg: ProgramCfg,
    /// CFG with toggle tests; the runtime executes this one.
    pub cfg: ProgramCfg,
    pub toggle_loops: bool,
    toggleable: Vec<bool>,
    /// For every block of `cfg`: the base block it was split from, if it is an
    /// instrumentation block.
    origin: Vec<Option<BlockId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ToggleError {
    #[error("unknown guard {0}")]
    UnknownGuard(GuardId),
    #[error("guard {0} has no toggle (loop guards need --toggle-loops)")]
    NotToggleable(GuardId),
}

/// Rewrites every eligible guard to `tog || cond`. Loop guards get a toggle
/// only when `toggle_loops` is set.
pub fn insert_toggles(program: &Program, toggle_loops: bool) -> InstrumentedProgram {
    let base_cfg = guardlang::build_cfg(program);
    let toggleable: Vec<bool> = program
        .guards
        .iter()
        .map(|g| g.kind == GuardKind::If || toggle_loops)
        .collect();
    let mut cfg = base_cfg.clone();
    let mut origin = vec![None; cfg.blocks.len()];
    for (gi, &on) in toggleable.iter().enumerate() {
        if !on {
            continue;
        }
        let guard = GuardId(gi as u32);
        let host = cfg.guard_blocks[gi];
        let cond_id = BlockId(cfg.blocks.len() as u32);
        let host_block = &mut cfg.blocks[host.index()];
        let then_target = match &host_block.term {
            Terminator::Branch { then_, .. } => then_.target,
            other => unreachable!("guard block ends in a branch, found {other:?}"),
        };
        let branch = std::mem::replace(
            &mut host_block.term,
            Terminator::Toggle {
                guard,
                on: Jump {
                    target: then_target,
                    edge: 0,
                },
                off: Jump {
                    target: cond_id,
                    edge: 0,
                },
            },
        );
        let func = host_block.func;
        cfg.blocks.push(Block {
            id: cond_id,
            func,
            ops: Vec::new(),
            term: branch,
            instrumentation: true,
        });
        cfg.guard_blocks[gi] = cond_id;
        origin.push(Some(host));
    }
    cfg.finalize_edges();
    InstrumentedProgram {
        base: program.clone(),
        base_cfg,
        cfg,
        toggle_loops,
        toggleable,
        origin,
    }
}

impl InstrumentedProgram {
    pub fn guards(&self) -> &[GuardSite] {
        &self.base.guards
    }

    pub fn guard_count(&self) -> usize {
        self.base.guards.len()
    }

    pub fn is_toggleable(&self, g: GuardId) -> bool {
        self.toggleable.get(g.index()).copied().unwrap_or(false)
    }

    pub fn toggle_count(&self) -> usize {
        self.toggleable.iter().filter(|t| **t).count()
    }

    pub fn toggleable_guards(&self) -> impl Iterator<Item = GuardId> + '_ {
        self.toggleable
            .iter()
            .enumerate()
            .filter(|(_, t)| **t)
            .map(|(i, _)| GuardId(i as u32))
    }

    /// Display name of a guard's toggle: `TOG_1` for guard 0.
    pub fn toggle_name(&self, g: GuardId) -> Option<String> {
        self.is_toggleable(g).then(|| format!("TOG_{}", g.0 + 1))
    }

    /// Pretty-printed program with toggle disjuncts shown.
    pub fn render(&self) -> String {
        guardlang::pretty::render(&self.base, &|g| self.toggle_name(g))
    }

    /// True for blocks added by toggle insertion.
    pub fn is_instrumentation(&self, b: BlockId) -> bool {
        matches!(self.origin.get(b.index()), Some(Some(_)))
    }

    /// Maps an instrumented-CFG edge to the base CFG: edges into an
    /// instrumentation block vanish, edges out of one are attributed to the
    /// block it was split from.
    pub fn base_edge(&self, e: Edge) -> Option<Edge> {
        if self.is_instrumentation(e.to) {
            return None;
        }
        let from = match self.origin.get(e.from.index()) {
            Some(Some(host)) => *host,
            _ => e.from,
        };
        Some(Edge { from, to: e.to })
    }

    /// Projection of a set of edge indices of `cfg` onto sorted base edges.
    pub fn project_edges(&self, edges: &BitSet) -> Vec<Edge> {
        let mut out: Vec<Edge> = edges.iter().filter_map(|i| self.base_edge(self.cfg.edges[i])).collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Toggle states; a set bit means the toggle is on, i.e. the guard disabled.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ToggleVector {
    bits: BitSet,
}

impl ToggleVector {
    pub fn all_off(ip: &InstrumentedProgram) -> Self {
        ToggleVector {
            bits: BitSet::new(ip.guard_count()),
        }
    }

    pub fn with_disabled<'a>(
        ip: &InstrumentedProgram,
        guards: impl IntoIterator<Item = &'a GuardId>,
    ) -> Result<Self, ToggleError> {
        let mut tv = Self::all_off(ip);
        for &g in guards {
            tv.disable(ip, g)?;
        }
        Ok(tv)
    }

    pub fn disable(&mut self, ip: &InstrumentedProgram, g: GuardId) -> Result<(), ToggleError> {
        if g.index() >= ip.guard_count() {
            return Err(ToggleError::UnknownGuard(g));
        }
        if !ip.is_toggleable(g) {
            return Err(ToggleError::NotToggleable(g));
        }
        self.bits.insert(g.index());
        Ok(())
    }

    #[inline]
    pub fn is_on(&self, g: GuardId) -> bool {
        self.bits.contains(g.index())
    }

    pub fn disabled(&self) -> Vec<GuardId> {
        self.bits.iter().map(|i| GuardId(i as u32)).collect()
    }

    pub fn bits(&self) -> &BitSet {
        &self.bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Enabled,
    Disabled,
}

/// A node of the domination forest: the virtual root or a real guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Root,
    Guard(GuardId),
}

/// Domination forest over the toggleable guards, rooted at a virtual root
/// that is permanently disabled, plus the current status of every guard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardHierarchy {
    member: Vec<bool>,
    parent: Vec<Option<Node>>,
    children: Vec<Vec<GuardId>>,
    root_children: Vec<GuardId>,
    status: Vec<Status>,
}

/// Builds the hierarchy from lexical nesting. A guard's parent is the nearest
/// enclosing toggleable guard (either branch of an `if`, or a loop body);
/// guards without one hang off the virtual root. Guards without a toggle are
/// transparent and not members.
pub fn extract_hierarchy(ip: &InstrumentedProgram) -> GuardHierarchy {
    let n = ip.guard_count();
    let mut parents: Vec<Option<Option<GuardId>>> = vec![None; n];
    fn visit(
        body: &[Stmt],
        enclosing: Option<GuardId>,
        ip: &InstrumentedProgram,
        parents: &mut Vec<Option<Option<GuardId>>>,
    ) {
        for s in body {
            let (guard, bodies): (GuardId, Vec<&[Stmt]>) = match &s.kind {
                StmtKind::If {
                    guard,
                    then_body,
                    else_body,
                    ..
                } => {
                    let mut v: Vec<&[Stmt]> = vec![then_body];
                    if let Some(e) = else_body {
                        v.push(e);
                    }
                    (*guard, v)
                }
                StmtKind::While { guard, body, .. } => (*guard, vec![body.as_slice()]),
                _ => continue,
            };
            let inner = if ip.is_toggleable(guard) {
                parents[guard.index()] = Some(enclosing);
                Some(guard)
            } else {
                enclosing
            };
            for b in bodies {
                visit(b, inner, ip, parents);
            }
        }
    }
    for f in &ip.base.functions {
        visit(&f.body, None, ip, &mut parents);
    }
    GuardHierarchy::from_parent_table(&parents)
}

impl GuardHierarchy {
    /// Builds a hierarchy in which every guard `0..parents.len()` is a member;
    /// `None` marks a child of the virtual root. Parents must form a forest.
    pub fn from_parents(parents: &[Option<GuardId>]) -> Self {
        let table: Vec<Option<Option<GuardId>>> = parents.iter().map(|p| Some(*p)).collect();
        Self::from_parent_table(&table)
    }

    /// Outer `None` marks a non-member.
    fn from_parent_table(table: &[Option<Option<GuardId>>]) -> Self {
        let n = table.len();
        let mut h = GuardHierarchy {
            member: table.iter().map(Option::is_some).collect(),
            parent: vec![None; n],
            children: vec![Vec::new(); n],
            root_children: Vec::new(),
            status: vec![Status::Enabled; n],
        };
        for (i, entry) in table.iter().enumerate() {
            let g = GuardId(i as u32);
            match entry {
                None => {}
                Some(None) => {
                    h.parent[i] = Some(Node::Root);
                    h.root_children.push(g);
                }
                Some(Some(p)) => {
                    assert!(
                        table.get(p.index()).is_some_and(Option::is_some),
                        "parent {p} of {g} is not a member"
                    );
                    h.parent[i] = Some(Node::Guard(*p));
                    h.children[p.index()].push(g);
                }
            }
        }
        h
    }

    /// Number of guard ids addressed (members or not).
    pub fn len(&self) -> usize {
        self.member.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member.is_empty()
    }

    pub fn contains(&self, g: GuardId) -> bool {
        self.member.get(g.index()).copied().unwrap_or(false)
    }

    pub fn guards(&self) -> impl Iterator<Item = GuardId> + '_ {
        self.member
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| GuardId(i as u32))
    }

    /// Immediate children, ascending.
    pub fn successors(&self, n: Node) -> &[GuardId] {
        match n {
            Node::Root => &self.root_children,
            Node::Guard(g) => self.children.get(g.index()).map_or(&[], Vec::as_slice),
        }
    }

    pub fn parent(&self, g: GuardId) -> Option<Node> {
        self.parent.get(g.index()).copied().flatten()
    }

    /// Guard ancestors from the immediate dominator outwards (root excluded).
    pub fn ancestors(&self, g: GuardId) -> Vec<GuardId> {
        let mut out = Vec::new();
        let mut cur = self.parent(g);
        while let Some(Node::Guard(p)) = cur {
            out.push(p);
            cur = self.parent(p);
        }
        out
    }

    /// Domination pairs `(parent, child)` between real guards, sorted.
    pub fn edges(&self) -> Vec<(GuardId, GuardId)> {
        let mut out: Vec<(GuardId, GuardId)> = self
            .guards()
            .flat_map(|g| self.successors(Node::Guard(g)).iter().map(move |c| (g, *c)))
            .collect();
        out.sort();
        out
    }

    pub fn root_children(&self) -> &[GuardId] {
        &self.root_children
    }

    /// Status of `n`; the virtual root is always disabled.
    pub fn status(&self, n: Node) -> Status {
        match n {
            Node::Root => Status::Disabled,
            Node::Guard(g) => self.status.get(g.index()).copied().unwrap_or(Status::Enabled),
        }
    }

    pub fn is_enabled(&self, g: GuardId) -> bool {
        self.status(Node::Guard(g)) == Status::Enabled
    }

    pub fn set_status(&mut self, g: GuardId, s: Status) {
        self.status[g.index()] = s;
    }

    /// Sets exactly `disabled` to disabled and every other guard to enabled.
    pub fn set_disabled<'a>(&mut self, disabled: impl IntoIterator<Item = &'a GuardId>) {
        self.status.iter_mut().for_each(|s| *s = Status::Enabled);
        for g in disabled {
            self.status[g.index()] = Status::Disabled;
        }
    }
}
