// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeSet;

use common::*;
use poco_core::oracle::{independent_reckless_program, singleton_crashers};
use poco_core::reckless::{collect_converging_reckless, collect_crashing_reckless};
use poco_core::runtime::{Executor, DEFAULT_BUDGET};
use poco_core::{insert_toggles, GuardId, Seed};
use proptest::prelude::*;

fn g(i: u32) -> GuardId {
    GuardId(i)
}

fn log2_ceil(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()) as usize
}

#[test]
fn synergy_pair_blames_the_later_guard() {
    let ip = ip(BOO);
    let ex = Executor::new(&ip, DEFAULT_BUDGET);
    let c = vec![Seed::new("seed", vec![4u8, 8])];
    let r = collect_crashing_reckless(&ex, &c, &[g(0), g(1)], DEFAULT_BUDGET * 10).unwrap();
    assert!(r.precondition_held);
    assert_eq!(r.reckless, BTreeSet::from([g(1)]));
    assert_eq!(r.probes, 4);
}

#[test]
fn precondition_violation_yields_nothing() {
    let ip = ip(BOO);
    let ex = Executor::new(&ip, DEFAULT_BUDGET);
    let c = vec![Seed::new("seed", vec![4u8, 8])];
    let r = collect_crashing_reckless(&ex, &c, &[g(0)], DEFAULT_BUDGET * 10).unwrap();
    assert!(!r.precondition_held);
    assert!(r.reckless.is_empty());
}

#[test]
fn sole_reckless_guard_is_found_in_one_search_probe() {
    let p = independent_reckless_program(1, &BTreeSet::from([0]));
    let ip = insert_toggles(&p, false);
    let ex = Executor::new(&ip, DEFAULT_BUDGET);
    let c = vec![Seed::new("z", vec![0u8; 4])];
    let r = collect_crashing_reckless(&ex, &c, &[g(0)], DEFAULT_BUDGET).unwrap();
    assert_eq!(r.reckless, BTreeSet::from([g(0)]));
    // one precondition probe plus one search probe
    assert_eq!(r.probes, 2);
}

#[test]
fn converging_flags_entry_guard() {
    let ip = ip(XMLENTRY);
    let ex = Executor::new(&ip, DEFAULT_BUDGET);
    // the length check at the entry of main is guard 3
    assert_eq!(ip.guards()[3].span.line, 18);
    let seeds = vec![Seed::new("d", "<?x")];
    let r = collect_converging_reckless(&ex, &seeds, &BTreeSet::from([g(3)])).unwrap();
    assert_eq!(r.reckless, BTreeSet::from([g(3)]));
    assert!(collect_converging_reckless(&ex, &seeds, &BTreeSet::new())
        .unwrap()
        .reckless
        .is_empty());
}

#[test]
fn converging_skips_guards_behind_untaken_branches() {
    let ip = ip("fn main(input) { if (input[0] == 1) { if (input[1] == 1) { crash(\"a\"); } } }");
    let ex = Executor::new(&ip, DEFAULT_BUDGET);
    let seeds = vec![Seed::new("z", vec![0u8, 0])];
    let r = collect_converging_reckless(&ex, &seeds, &BTreeSet::from([g(1)])).unwrap();
    assert!(r.reckless.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn matches_singleton_oracle(n in 1usize..=12, mask in any::<u16>(), rot in 0usize..12) {
        let reckless: BTreeSet<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let p = independent_reckless_program(n, &reckless);
        let ip = insert_toggles(&p, false);
        let ex = Executor::new(&ip, 1_000);
        let corpus = vec![Seed::new("z", vec![0u8; 12])];
        let mut order: Vec<GuardId> = (0..n as u32).map(GuardId).collect();
        order.rotate_left(rot % n);
        let r = collect_crashing_reckless(&ex, &corpus, &order, 10_000).unwrap();
        let oracle = singleton_crashers(&ex, &corpus, &order, 10_000);
        prop_assert_eq!(r.precondition_held, !reckless.is_empty());
        prop_assert_eq!(&r.reckless, &oracle);
        let k = reckless.len();
        let bound = 4 * k * log2_ceil(n) + log2_ceil(n) + 2;
        if k == 0 {
            prop_assert_eq!(r.probes, 1);
        } else {
            prop_assert!(r.probes <= bound, "probes {} > bound {} (n={}, k={})", r.probes, bound, n, k);
        }
    }
}
