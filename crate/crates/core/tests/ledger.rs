// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use poco_core::insert_toggles;
use poco_core::ledger::composition;
use poco_core::select::{select, SelectConfig};
use poco_core::Seed;

#[test]
fn no_reckless_guards_means_no_reckless_cost() {
    let ip = ip("fn main(input) { let x = input[0] * 2; let y = x + input[1]; }");
    let c = vec![Seed::new("a", vec![1u8, 1]), Seed::new("b", vec![0u8, 0])];
    let sel = select(&ip, &c, &SelectConfig::default()).unwrap();
    assert!(sel.reckless.is_empty());
    let comp = composition(sel.trace.iter().map(|r| (r.round, &r.work)));
    assert_eq!(comp.totals.crashing, 0);
    assert_eq!(comp.totals.converging, 0);
    assert!(comp.totals.base_cmin > 0);
    let sum: f64 = comp.percentages.iter().sum();
    assert!((sum - 100.0).abs() < 1e-9);
}

#[test]
fn crashing_cost_is_dominated_by_probes() {
    let p = poco_core::parse(LOOPFAULT).unwrap();
    let ip = insert_toggles(&p, true);
    let c = vec![Seed::new("a", vec![1u8; 16])];
    let cfg = SelectConfig {
        budget: 2_000,
        ..SelectConfig::default()
    };
    let sel = select(&ip, &c, &cfg).unwrap();
    let comp = composition(sel.trace.iter().map(|r| (r.round, &r.work)));
    assert!(comp.totals.crashing > 0);
    assert!(comp.probe_share.unwrap() >= 0.9, "{:?}", comp.probe_share);
    assert_eq!(comp.rows.len(), sel.trace.len());
}

#[test]
fn wall_times_only_when_asked() {
    let ip = ip(FOO);
    let sel = select(&ip, &foo_corpus(), &SelectConfig::default()).unwrap();
    assert!(sel.trace.iter().all(|r| r.wall_ns.is_none()));
    let cfg = SelectConfig {
        record_wall: true,
        ..SelectConfig::default()
    };
    let sel = select(&ip, &foo_corpus(), &cfg).unwrap();
    assert!(sel.trace.iter().all(|r| r.wall_ns.is_some()));
}
