// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeSet;

use common::*;
use poco_core::hierarchy::{collect_outermost, is_obstacle};
use poco_core::instrument::{extract_hierarchy, Node, Status};
use poco_core::oracle::{outermost_oracle, random_forest};
use poco_core::{GuardHierarchy, GuardId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn g(i: u32) -> GuardId {
    GuardId(i)
}

fn set(v: &[u32]) -> BTreeSet<GuardId> {
    v.iter().map(|i| g(*i)).collect()
}

/// g0 -> {g1, g2}, g1 -> {g3, g4}, g3 -> {g6}, g2 -> {g5}, g7 top-level.
fn eight_guard_forest() -> GuardHierarchy {
    let p = |x: u32| Some(g(x));
    GuardHierarchy::from_parents(&[None, p(0), p(0), p(1), p(1), p(2), p(3), None])
}

#[test]
fn foo_is_a_chain() {
    let h = extract_hierarchy(&ip(FOO));
    assert_eq!(h.root_children(), &[g(0)]);
    assert_eq!(h.edges(), vec![(g(0), g(1)), (g(1), g(2)), (g(2), g(3)), (g(3), g(4))]);
}

#[test]
fn dominant_sets_are_ancestor_chains() {
    let h = eight_guard_forest();
    assert_eq!(h.ancestors(g(2)), vec![g(0)]);
    assert_eq!(h.ancestors(g(4)), vec![g(1), g(0)]);
    assert_eq!(h.ancestors(g(6)), vec![g(3), g(1), g(0)]);
}

#[test]
fn siblings_hang_off_the_root() {
    let h = extract_hierarchy(&ip("fn main(input) { if (input[0]) { } if (input[1]) { } }"));
    assert_eq!(h.root_children(), &[g(0), g(1)]);
    assert!(h.edges().is_empty());
}

#[test]
fn boundary_below_disabled_guards() {
    let mut h = eight_guard_forest();
    h.set_disabled(&[g(0), g(1), g(3)]);
    // starting from every disabled guard (or from the root) reaches g2, g4, g6
    let expected = set(&[2, 4, 6]);
    assert_eq!(collect_outermost(&h, &set(&[0, 1, 3])).guards, expected);
    let from_root = collect_outermost(&h, &BTreeSet::new()).guards;
    assert_eq!(from_root, set(&[2, 4, 6, 7]));
    // starting only below g0 misses its other child
    assert_eq!(collect_outermost(&h, &set(&[1, 3])).guards, set(&[4, 6]));
}

#[test]
fn fresh_hierarchy_yields_top_level_guards() {
    let h = eight_guard_forest();
    assert_eq!(collect_outermost(&h, &BTreeSet::new()).guards, set(&[0, 7]));
}

#[test]
fn chain_advances_one_level() {
    let mut h = GuardHierarchy::from_parents(&[None, Some(g(0)), Some(g(1))]);
    h.set_status(g(0), Status::Disabled);
    assert_eq!(collect_outermost(&h, &set(&[0])).guards, set(&[1]));
}

#[test]
fn foo_round_two_obstacle() {
    let mut h = extract_hierarchy(&ip(FOO));
    h.set_status(g(0), Status::Disabled);
    assert_eq!(is_obstacle(g(1), &h, &set(&[1, 2, 3, 4]), &BTreeSet::new()), Ok(true));
    assert_eq!(is_obstacle(g(0), &h, &set(&[0]), &set(&[0])), Ok(false));
    assert_eq!(h.status(Node::Root), Status::Disabled);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_ancestor_oracle(seed in any::<u64>(), n in 1usize..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = GuardHierarchy::from_parents(&random_forest(&mut rng, n));
        let disabled: Vec<GuardId> = (0..n as u32).map(GuardId).filter(|_| rng.random_bool(0.5)).collect();
        h.set_disabled(&disabled);
        let empty = BTreeSet::new();
        let got = collect_outermost(&h, &empty);
        prop_assert_eq!(&got.guards, &outermost_oracle(&h, &empty));
        for g in &got.guards {
            prop_assert!(h.is_enabled(*g));
            prop_assert!(h.ancestors(*g).iter().all(|a| !h.is_enabled(*a)));
        }
        prop_assert!(got.visited <= n + 1);

        // a frontier of disabled guards with disabled ancestors
        let o_new: BTreeSet<GuardId> = disabled.iter().copied()
            .filter(|g| h.ancestors(*g).iter().all(|a| !h.is_enabled(*a)))
            .filter(|_| rng.random_bool(0.5))
            .collect();
        let got = collect_outermost(&h, &o_new);
        prop_assert_eq!(&got.guards, &outermost_oracle(&h, &o_new));
        prop_assert!(got.guards.is_disjoint(&o_new));
    }
}
