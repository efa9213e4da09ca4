// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use poco_core::guardlang::gen::{random_corpus, random_program, GenConfig};
use poco_core::guardlang::GuardId;
use poco_core::oracle::reached_guards;
use poco_core::runtime::{
    execute, execute_corpus, execute_corpus_sequential, execute_uninstrumented, FaultKind, RuntimeError, DEFAULT_BUDGET,
};
use poco_core::{insert_toggles, BitSet, Seed, ToggleVector, Verdict};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn g(i: u32) -> GuardId {
    GuardId(i)
}

#[test]
fn foo_jello_all_off_takes_no_branch() {
    let ip = ip(FOO);
    let o = execute(
        &ip,
        &ToggleVector::all_off(&ip),
        &Seed::new("s2", "jello"),
        DEFAULT_BUDGET,
    );
    assert_eq!(o.verdict, Verdict::Ok);
    assert!(o.cond_sat.is_empty());
    assert!(o.branch_entered.is_empty());
}

#[test]
fn foo_jello_with_first_guard_disabled_passes_the_rest() {
    let ip = ip(FOO);
    let tv = ToggleVector::with_disabled(&ip, &[g(0)]).unwrap();
    let o = execute(&ip, &tv, &Seed::new("s2", "jello"), DEFAULT_BUDGET);
    assert!(o.branch_entered.contains(0));
    assert!(!o.cond_sat.contains(0));
    for i in 1..5 {
        assert!(o.cond_sat.contains(i), "g{i}");
    }
    assert_eq!(o.verdict, Verdict::Bug("hello".into()));
}

#[test]
fn boo_faults_with_both_guards_disabled() {
    let ip = ip(BOO);
    let seed = Seed::new("seed", vec![4u8, 8]);
    let both = ToggleVector::with_disabled(&ip, &[g(0), g(1)]).unwrap();
    assert_eq!(
        execute(&ip, &both, &seed, DEFAULT_BUDGET).verdict,
        Verdict::Fault(FaultKind::IndexOutOfBounds)
    );
    for single in [g(0), g(1)] {
        let tv = ToggleVector::with_disabled(&ip, &[single]).unwrap();
        assert_eq!(
            execute(&ip, &tv, &seed, DEFAULT_BUDGET).verdict,
            Verdict::Ok,
            "{single}"
        );
    }
}

#[test]
fn faults_are_distinguished() {
    let cases = [
        ("fn main(input) { let a = 1 / input[0]; }", FaultKind::DivisionByZero),
        ("fn main(input) { let a = 1 % input[0]; }", FaultKind::ModuloByZero),
        (
            "fn main(input) { let a = [0; 2]; let b = a[input[0] + 2]; }",
            FaultKind::IndexOutOfBounds,
        ),
        (
            "fn f(n) { let r = f(n + 1); return r; } fn main(input) { let x = f(0); }",
            FaultKind::StackOverflow,
        ),
    ];
    for (src, kind) in cases {
        let ip = ip(src);
        let o = execute(&ip, &ToggleVector::all_off(&ip), &Seed::new("e", ""), DEFAULT_BUDGET);
        assert_eq!(o.verdict, Verdict::Fault(kind), "{src}");
    }
}

#[test]
fn toggled_open_loop_times_out_exactly_at_budget() {
    let p = poco_core::parse(LOOPFAULT).unwrap();
    let ip = insert_toggles(&p, true);
    let tv = ToggleVector::with_disabled(&ip, &[g(0)]).unwrap();
    let o = execute(&ip, &tv, &Seed::new("e", ""), 5_000);
    assert_eq!(o.verdict, Verdict::Timeout);
    assert_eq!(o.steps, 5_000);
}

#[test]
fn crash_reaches_the_sink_edge() {
    let ip = ip(FOO);
    let o = execute(
        &ip,
        &ToggleVector::all_off(&ip),
        &Seed::new("h", "hello"),
        DEFAULT_BUDGET,
    );
    assert_eq!(o.verdict, Verdict::Bug("hello".into()));
    let sink = poco_core::guardlang::BlockId::sink(0);
    assert!(o.edge_list(&ip.cfg).iter().any(|e| e.to == sink));
}

#[test]
fn foo_corpus_seeds_share_one_path() {
    let ip = ip(FOO);
    let run = execute_corpus(&ip, &ToggleVector::all_off(&ip), &foo_corpus(), DEFAULT_BUDGET).unwrap();
    assert!(run.outcomes.iter().all(|o| o.edges == run.outcomes[0].edges));
    assert_eq!(run.edges, run.outcomes[0].edges);
}

#[test]
fn opposite_branches_merge_strictly_larger() {
    let ip = ip("fn main(input) { let x = 0; if (input[0] == 1) { x = 1; } else { x = 2; } }");
    let seeds = vec![Seed::new("a", vec![1u8]), Seed::new("b", vec![0u8])];
    let run = execute_corpus(&ip, &ToggleVector::all_off(&ip), &seeds, DEFAULT_BUDGET).unwrap();
    for o in &run.outcomes {
        assert!(o.edges.is_subset(&run.edges) && o.edges != run.edges);
    }
}

#[test]
fn one_seed_corpus_merges_to_itself() {
    let ip = ip(FOO);
    let tv = ToggleVector::all_off(&ip);
    let s = Seed::new("h", "help");
    let run = execute_corpus(&ip, &tv, std::slice::from_ref(&s), DEFAULT_BUDGET).unwrap();
    let o = execute(&ip, &tv, &s, DEFAULT_BUDGET);
    assert_eq!(run.edges, o.edges);
    assert_eq!(run.cond_sat, o.cond_sat);
    assert_eq!(run.branch_entered, o.branch_entered);
    assert_eq!(run.result, o.verdict);
}

#[test]
fn empty_corpus_is_an_error() {
    let ip = ip(FOO);
    assert_eq!(
        execute_corpus(&ip, &ToggleVector::all_off(&ip), &[], DEFAULT_BUDGET),
        Err(RuntimeError::EmptyCorpus)
    );
}

#[test]
fn verdict_severity_order() {
    assert!(Verdict::Ok < Verdict::Bug("a".into()));
    assert!(Verdict::Bug("z".into()) < Verdict::Timeout);
    assert!(Verdict::Timeout < Verdict::Fault(FaultKind::IndexOutOfBounds));
}

#[test]
fn instrumenting_straight_line_code_changes_nothing() {
    let ip = ip("fn main(input) { let a = input[0]; let b = a * 2; }");
    assert_eq!(ip.toggle_count(), 0);
    assert_eq!(ip.cfg, ip.base_cfg);
}

#[test]
fn toggle_display_names() {
    let ip = ip("fn main(input) { let x = input[0]; if (x > 1) { x = 0; } }");
    assert!(ip.render().contains("if (TOG_1 || x > 1) {"));
}

fn program_and_inputs(seed: u64, cfg: &GenConfig) -> (poco_core::InstrumentedProgram, Vec<Seed>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_program(&mut rng, cfg);
    let seeds = random_corpus(&mut rng, 6, 8);
    (insert_toggles(&p, false), seeds)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn all_off_matches_base_program(seed in any::<u64>()) {
        let (ip, seeds) = program_and_inputs(seed, &GenConfig::default());
        let tv = ToggleVector::all_off(&ip);
        for s in &seeds {
            let a = execute(&ip, &tv, s, DEFAULT_BUDGET);
            let b = execute_uninstrumented(&ip, s, DEFAULT_BUDGET);
            prop_assert_eq!(&a.verdict, &b.verdict);
            prop_assert_eq!(&a.cond_sat, &b.cond_sat);
            prop_assert_eq!(&a.branch_entered, &b.branch_entered);
            prop_assert_eq!(a.steps, b.steps);
            prop_assert_eq!(ip.project_edges(&a.edges), b.edge_list(&ip.base_cfg));
        }
    }

    #[test]
    fn bitmap_and_budget_invariants(seed in any::<u64>(), mask in any::<u64>(), budget in 1u64..400) {
        let (ip, seeds) = program_and_inputs(seed, &GenConfig::default());
        let on: Vec<GuardId> = ip.toggleable_guards().filter(|g| mask >> (g.0 % 64) & 1 == 1).collect();
        let tv = ToggleVector::with_disabled(&ip, &on).unwrap();
        for s in &seeds {
            let o = execute(&ip, &tv, s, budget);
            prop_assert!(o.cond_sat.is_subset(&o.branch_entered));
            prop_assert!(o.steps <= budget);
            prop_assert_eq!(o.verdict == Verdict::Timeout, o.steps == budget && o.verdict == Verdict::Timeout);
            if o.verdict == Verdict::Timeout {
                prop_assert_eq!(o.steps, budget);
            }
            // determinism
            prop_assert_eq!(&o, &execute(&ip, &tv, s, budget));
        }
    }

    #[test]
    fn forced_guards_always_enter(seed in any::<u64>()) {
        let (ip, seeds) = program_and_inputs(seed, &GenConfig::default());
        let all: Vec<GuardId> = ip.toggleable_guards().collect();
        let tv = ToggleVector::with_disabled(&ip, &all).unwrap();
        for s in &seeds {
            let o = execute(&ip, &tv, s, DEFAULT_BUDGET);
            let reached = reached_guards(&ip, &BitSet::from_indices(
                ip.base_cfg.edges.len(),
                ip.project_edges(&o.edges).iter().filter_map(|e| ip.base_cfg.edge_index(*e)).map(|i| i as usize),
            ));
            for g in reached {
                if ip.is_toggleable(g) {
                    prop_assert!(o.branch_entered.contains(g.index()), "{} reached but not entered", g);
                }
            }
        }
    }

    #[test]
    fn sequential_and_parallel_agree(seed in any::<u64>()) {
        let (ip, seeds) = program_and_inputs(seed, &GenConfig::default());
        let tv = ToggleVector::all_off(&ip);
        prop_assert_eq!(
            execute_corpus(&ip, &tv, &seeds, DEFAULT_BUDGET).unwrap(),
            execute_corpus_sequential(&ip, &tv, &seeds, DEFAULT_BUDGET).unwrap()
        );
    }

    #[test]
    fn reads_past_the_end_are_zero(bytes in proptest::collection::vec(any::<u8>(), 0..6), k in 0usize..12) {
        let ip = ip(&format!("fn main(input) {{ if (input[{k}] != 0) {{ crash(\"nz\"); }} }}"));
        let o = execute(&ip, &ToggleVector::all_off(&ip), &Seed::new("x", bytes.clone()), DEFAULT_BUDGET);
        let expect_bug = bytes.get(k).is_some_and(|b| *b != 0);
        prop_assert_eq!(o.verdict == Verdict::Bug("nz".into()), expect_bug);
        prop_assert!(!o.verdict.is_crash());
    }

    #[test]
    fn toggling_more_never_hides_reached_guards(seed in any::<u64>(), m1 in any::<u64>(), m2 in any::<u64>()) {
        let (ip, seeds) = program_and_inputs(seed, &GenConfig::plain());
        let small: Vec<GuardId> = ip.toggleable_guards().filter(|g| m1 >> (g.0 % 64) & 1 == 1).collect();
        let large: Vec<GuardId> = ip.toggleable_guards().filter(|g| (m1 | m2) >> (g.0 % 64) & 1 == 1).collect();
        let ts = ToggleVector::with_disabled(&ip, &small).unwrap();
        let tl = ToggleVector::with_disabled(&ip, &large).unwrap();
        let reached = |tv: &ToggleVector, s: &Seed| {
            let o = execute(&ip, tv, s, DEFAULT_BUDGET);
            let base: Vec<usize> = ip.project_edges(&o.edges).iter()
                .filter_map(|e| ip.base_cfg.edge_index(*e)).map(|i| i as usize).collect();
            reached_guards(&ip, &BitSet::from_indices(ip.base_cfg.edges.len(), base))
        };
        for s in &seeds {
            prop_assert!(reached(&ts, s).is_subset(&reached(&tl, s)));
        }
    }
}
