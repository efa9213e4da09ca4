// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeSet;

use common::*;
use poco_core::guardlang::gen::{random_corpus, random_program, GenConfig};
use poco_core::instrument::extract_hierarchy;
use poco_core::minimize::cmin;
use poco_core::select::{check_fixed_point, select, RecklessCheck, SelectConfig, SelectError, Termination};
use poco_core::{insert_toggles, GuardId, Seed, ToggleVector, Verdict};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn g(i: u32) -> GuardId {
    GuardId(i)
}

fn gs(v: &[u32]) -> Vec<GuardId> {
    v.iter().map(|i| g(*i)).collect()
}

fn strs(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn foo_round_structure() {
    let ip = ip(FOO);
    let c = foo_corpus();
    let sel = select(&ip, &c, &SelectConfig::default()).unwrap();
    let t = &sel.trace;
    assert_eq!(sel.termination, Termination::FixedPoint);
    assert_eq!(t.len(), 5, "{t:#?}");

    assert_eq!(t[0].selected, strs(&["s3"]));
    assert_eq!(t[0].outermost, gs(&[0]));
    assert_eq!(t[0].newly_disabled, gs(&[0]));

    assert_eq!(t[1].disabled, gs(&[0]));
    assert_eq!(t[1].selected, strs(&["s2", "s3"]));
    assert_eq!(t[1].s_increment, strs(&["s2"]));
    assert_eq!(t[1].aggregate, Verdict::Bug("hello".into()));
    assert_eq!(t[1].passed, gs(&[1, 2, 3, 4]));

    assert_eq!(t[2].selected, strs(&["s3"]));
    assert!(t[2].passed.is_empty() && t[2].outermost.is_empty());
    assert!(!t[2].fixed_point.selection_converged);

    assert_eq!(t[3].reckless_check, RecklessCheck::Converging);
    assert_eq!(t[3].newly_reckless, gs(&[0, 1, 2, 3, 4]));

    assert!(t[4].disabled.is_empty());
    let fp = t[4].fixed_point;
    assert!(fp.selection_converged && fp.no_reckless && fp.no_passed && fp.no_outermost && fp.reached);

    let chosen: Vec<&str> = sel.selected.iter().map(|i| c[*i].id.as_str()).collect();
    assert_eq!(chosen, vec!["s2", "s3"]);
    assert_eq!(
        sel.delta.iter().map(|i| c[*i].id.as_str()).collect::<Vec<_>>(),
        vec!["s2"]
    );
    for r in t {
        let mut end: BTreeSet<String> = r.s_begin.iter().cloned().collect();
        end.extend(r.s_increment.iter().cloned());
        assert_eq!(end, r.s_end.iter().cloned().collect());
    }
}

#[test]
fn saturating_corpus_adds_nothing() {
    let ip = ip("fn main(input) { let x = 0; if (input[0] == 1) { x = 1; } if (input[1] == 1) { x = 2; } }");
    let c = vec![Seed::new("a", vec![1u8, 1]), Seed::new("b", vec![0u8, 0])];
    let sel = select(&ip, &c, &SelectConfig::default()).unwrap();
    assert_eq!(sel.termination, Termination::FixedPoint);
    assert_eq!(sel.trace[0].passed, gs(&[0, 1]));
    assert_eq!(sel.selected, sel.baseline);
    assert!(sel.delta.is_empty());
}

#[test]
fn guard_free_program_stops_in_round_two() {
    let ip = ip("fn main(input) { let a = input[0] + 1; }");
    let c = vec![Seed::new("a", "x"), Seed::new("b", "yy")];
    let sel = select(&ip, &c, &SelectConfig::default()).unwrap();
    assert_eq!(sel.trace.len(), 2);
    assert!(sel.trace[1].fixed_point.reached);
    assert_eq!(sel.selected, sel.baseline);
}

#[test]
fn baseline_faults_are_refused() {
    let ip = ip("fn main(input) { let a = 10 / input[0]; }");
    let c = vec![Seed::new("ok", vec![1u8]), Seed::new("bad", vec![0u8])];
    match select(&ip, &c, &SelectConfig::default()) {
        Err(SelectError::Baseline(v)) => assert_eq!(v[0].0, "bad"),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(
        select(&ip, &[], &SelectConfig::default()).unwrap_err(),
        SelectError::EmptyCorpus
    );
}

#[test]
fn crashing_loop_guard_is_recovered() {
    let p = poco_core::parse(LOOPFAULT).unwrap();
    let ip = insert_toggles(&p, true);
    let c = vec![Seed::new("a", vec![1u8; 16])];
    let cfg = SelectConfig {
        budget: 2_000,
        ..SelectConfig::default()
    };
    let sel = select(&ip, &c, &cfg).unwrap();
    let crash_rounds: Vec<_> = sel
        .trace
        .iter()
        .filter(|r| r.reckless_check == RecklessCheck::Crashing)
        .collect();
    assert_eq!(crash_rounds.len(), 1);
    assert_eq!(crash_rounds[0].newly_reckless, gs(&[0]));
    assert!(sel.reckless.contains(&g(0)));
    assert_eq!(sel.termination, Termination::FixedPoint);
}

#[test]
fn fixed_point_conjuncts() {
    let s: BTreeSet<usize> = BTreeSet::from([1]);
    let e = BTreeSet::new();
    assert!(check_fixed_point(&s, &s, &e, &e, &e).reached);
    let omega = BTreeSet::from([g(2)]);
    let fp = check_fixed_point(&s, &s, &e, &omega, &e);
    assert!(fp.selection_converged && !fp.no_outermost && !fp.reached);
    assert!(!check_fixed_point(&s, &s, &omega, &e, &e).reached);
    assert!(!check_fixed_point(&s, &BTreeSet::from([2]), &e, &e, &e).reached);
}

#[test]
fn round_limit_is_honored() {
    let ip = ip(FOO);
    let cfg = SelectConfig {
        max_rounds: 2,
        ..SelectConfig::default()
    };
    let sel = select(&ip, &foo_corpus(), &cfg).unwrap();
    assert_eq!(sel.termination, Termination::MaxRounds);
    assert_eq!(sel.trace.len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn termination_monotonicity_and_stickiness(seed in any::<u64>(), loops in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_program(&mut rng, &GenConfig::default());
        let corpus = random_corpus(&mut rng, 8, 8);
        let ip = insert_toggles(&p, loops);
        let cfg = SelectConfig { budget: 5_000, ..SelectConfig::default() };
        let sel = match select(&ip, &corpus, &cfg) {
            Ok(s) => s,
            Err(SelectError::Baseline(_)) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let bound = corpus.len() + 2 * ip.guard_count() + 1;
        prop_assert_eq!(sel.termination, Termination::FixedPoint);
        prop_assert!(sel.trace.len() <= bound, "{} rounds > {}", sel.trace.len(), bound);

        let h = extract_hierarchy(&ip);
        let mut reckless: BTreeSet<GuardId> = BTreeSet::new();
        let mut prev: BTreeSet<String> = BTreeSet::new();
        for r in &sel.trace {
            let begin: BTreeSet<String> = r.s_begin.iter().cloned().collect();
            let end: BTreeSet<String> = r.s_end.iter().cloned().collect();
            prop_assert_eq!(&begin, &prev);
            prop_assert!(begin.is_subset(&end));
            prev = end;
            for gd in r.disabled.iter().chain(&r.passed).chain(&r.outermost).chain(&r.newly_disabled) {
                prop_assert!(!reckless.contains(gd), "reckless {} reappeared", gd);
                prop_assert!(h.contains(*gd));
            }
            reckless.extend(r.newly_reckless.iter().copied());
            // replaying the round's toggles reproduces its selection
            let tv = ToggleVector::with_disabled(&ip, &r.disabled).unwrap();
            let again = cmin(&ip, &tv, &corpus, cfg.budget).unwrap();
            let ids: Vec<String> = again.selected.iter().map(|i| corpus[*i].id.clone()).collect();
            prop_assert_eq!(&ids, &r.selected);
        }
        let base: BTreeSet<usize> = sel.baseline.iter().copied().collect();
        let fin: BTreeSet<usize> = sel.selected.iter().copied().collect();
        prop_assert!(base.is_subset(&fin));
        prop_assert!(sel.disabled.iter().all(|g| !reckless.contains(g)));
    }
}
