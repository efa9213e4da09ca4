// SPDX-License-Identifier: Apache-2.0

//! Brute-force reference implementations and synthetic targets used to check
//! the real algorithms. Everything here favors obviousness over speed.

use std::collections::BTreeSet;

use rand::Rng;

use crate::bits::BitSet;
use crate::guardlang::{parse, GuardId, Program};
use crate::instrument::{GuardHierarchy, InstrumentedProgram, Node, ToggleVector};
use crate::runtime::{Executor, Seed};

/// Random domination forest: each guard picks an earlier guard as parent or
/// hangs off the root.
pub fn random_forest<R: Rng>(rng: &mut R, n: usize) -> Vec<Option<GuardId>> {
    (0..n)
        .map(|i| {
            if i == 0 || rng.random_bool(0.3) {
                None
            } else {
                Some(GuardId(rng.random_range(0..i) as u32))
            }
        })
        .collect()
}

/// Outermost guards by ancestor walk. A guard qualifies when it is enabled,
/// not in `o_new`, and walking up from it passes only disabled or `o_new`
/// guards until it meets an `o_new` guard, or the root when `o_new` is empty.
pub fn outermost_oracle(h: &GuardHierarchy, o_new: &BTreeSet<GuardId>) -> BTreeSet<GuardId> {
    h.guards()
        .filter(|g| h.is_enabled(*g) && !o_new.contains(g))
        .filter(|&g| {
            let mut cur = h.parent(g);
            loop {
                match cur {
                    Some(Node::Guard(p)) if o_new.contains(&p) => return true,
                    Some(Node::Guard(p)) if !h.is_enabled(p) => cur = h.parent(p),
                    Some(Node::Guard(_)) => return false,
                    Some(Node::Root) | None => return o_new.is_empty(),
                }
            }
        })
        .collect()
}

/// Smallest subset of `sets` whose union equals the union of all of them.
/// Exponential; meant for at most a dozen sets.
pub fn exhaustive_min_cover(sets: &[BitSet]) -> Vec<usize> {
    assert!(sets.len() <= 20, "exhaustive cover over {} sets", sets.len());
    if sets.is_empty() {
        return Vec::new();
    }
    let mut all = BitSet::new(sets[0].capacity());
    sets.iter().for_each(|s| all.union_with(s));
    let n = sets.len();
    let mut best: Option<Vec<usize>> = None;
    for mask in 0u32..(1 << n) {
        let size = mask.count_ones() as usize;
        if best.as_ref().is_some_and(|b| b.len() <= size) {
            continue;
        }
        let mut u = BitSet::new(all.capacity());
        for (i, s) in sets.iter().enumerate() {
            if mask & (1 << i) != 0 {
                u.union_with(s);
            }
        }
        if u == all {
            best = Some((0..n).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    best.expect("the full family covers itself")
}

/// Guards of `g_minus` that crash the corpus when disabled alone.
pub fn singleton_crashers(ex: &Executor<'_>, corpus: &[Seed], g_minus: &[GuardId], budget: u64) -> BTreeSet<GuardId> {
    g_minus
        .iter()
        .copied()
        .filter(|g| {
            let tv = ToggleVector::with_disabled(ex.ip, [g]).expect("toggleable");
            ex.run(&tv, corpus, budget).expect("non-empty corpus").result.is_crash()
        })
        .collect()
}

/// A program of `n` sequential top-level guards over an all-zero input.
/// Guards listed in `reckless` fault on a negative array index when forced
/// open; the others are harmless. Each guard `i` reads `input[i]`.
pub fn independent_reckless_program(n: usize, reckless: &BTreeSet<usize>) -> Program {
    let mut src = String::from("fn main(input) {\n    let sink = [0; 1];\n    let x = 0;\n");
    for i in 0..n {
        if reckless.contains(&i) {
            src.push_str(&format!(
                "    if (input[{i}] == 200) {{\n        sink[input[{i}] - 200] = 1;\n    }}\n"
            ));
        } else {
            src.push_str(&format!("    if (input[{i}] == 200) {{\n        x = x + 1;\n    }}\n"));
        }
    }
    src.push_str("}\n");
    parse(&src).expect("synthetic program parses")
}

/// Guards reached by an execution: the guard's condition block was left
/// through one of its edges. Works on the base CFG of `ip`.
pub fn reached_guards(ip: &InstrumentedProgram, edges_base: &BitSet) -> BTreeSet<GuardId> {
    let cfg = &ip.base_cfg;
    (0..ip.guard_count())
        .map(|i| GuardId(i as u32))
        .filter(|g| {
            let host = cfg.guard_blocks[g.index()];
            edges_base.iter().any(|e| cfg.edges[e].from == host)
        })
        .collect()
}
