// SPDX-License-Identifier: Apache-2.0

//! Outermost-guard discovery and the obstacle predicate.

use std::collections::{BTreeSet, HashSet, VecDeque};

use thiserror::Error;

use crate::guardlang::GuardId;
use crate::instrument::{GuardHierarchy, Node};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown guard {0}")]
pub struct UnknownGuard(pub GuardId);

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Outermost {
    pub guards: BTreeSet<GuardId>,
    /// Nodes dequeued and expanded.
    pub visited: usize,
}

/// Breadth-first walk from `o_new` (from the virtual root when `o_new` is
/// empty). An enabled successor outside `o_new` is outermost; any other
/// successor is enqueued so the boundary moves deeper. Each node is expanded
/// at most once.
pub fn collect_outermost(h: &GuardHierarchy, o_new: &BTreeSet<GuardId>) -> Outermost {
    let mut queue: VecDeque<Node> = if o_new.is_empty() {
        VecDeque::from([Node::Root])
    } else {
        o_new.iter().map(|g| Node::Guard(*g)).collect()
    };
    let mut checked: HashSet<Node> = HashSet::new();
    let mut out = Outermost::default();
    while let Some(n) = queue.pop_front() {
        if !checked.insert(n) {
            continue;
        }
        out.visited += 1;
        for &s in h.successors(n) {
            if !o_new.contains(&s) && h.is_enabled(s) {
                out.guards.insert(s);
            } else {
                queue.push_back(Node::Guard(s));
            }
        }
    }
    out
}

/// An enabled guard that was passed or is outermost.
pub fn is_obstacle(
    g: GuardId,
    h: &GuardHierarchy,
    passed: &BTreeSet<GuardId>,
    outermost: &BTreeSet<GuardId>,
) -> Result<bool, UnknownGuard> {
    if !h.contains(g) {
        return Err(UnknownGuard(g));
    }
    Ok(h.is_enabled(g) && (passed.contains(&g) || outermost.contains(&g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::Status;

    fn g(i: u32) -> GuardId {
        GuardId(i)
    }

    #[test]
    fn chain_moves_boundary_one_level() {
        let mut h = GuardHierarchy::from_parents(&[None, Some(g(0)), Some(g(1))]);
        h.set_status(g(0), Status::Disabled);
        let r = collect_outermost(&h, &BTreeSet::from([g(0)]));
        assert_eq!(r.guards, BTreeSet::from([g(1)]));
    }

    #[test]
    fn obstacle_requires_enabled() {
        let mut h = GuardHierarchy::from_parents(&[None]);
        let set = BTreeSet::from([g(0)]);
        assert_eq!(is_obstacle(g(0), &h, &set, &BTreeSet::new()), Ok(true));
        h.set_status(g(0), Status::Disabled);
        assert_eq!(is_obstacle(g(0), &h, &BTreeSet::new(), &set), Ok(false));
        assert_eq!(is_obstacle(g(3), &h, &set, &set), Err(UnknownGuard(g(3))));
    }
}
