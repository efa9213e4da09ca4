// SPDX-License-Identifier: Apache-2.0

use poco_core::metrics::{a12, fresh_seed_ratio, BugStat};
use proptest::prelude::*;

#[test]
fn same_seed_every_round_decays_as_one_over_n() {
    let rounds: Vec<Vec<&str>> = (0..6).map(|_| vec!["s"]).collect();
    let r = fresh_seed_ratio(&rounds);
    for (i, v) in r.iter().enumerate() {
        assert!((v.unwrap() - 1.0 / (i + 1) as f64).abs() < 1e-12);
    }
    assert_eq!(fresh_seed_ratio::<&str>(&[vec![]]), vec![None]);
}

#[test]
fn fresh_seeds_keep_ratio_at_one() {
    let rounds = vec![vec!["a"], vec!["b", "c"], vec!["d"]];
    assert!(fresh_seed_ratio(&rounds).iter().all(|v| *v == Some(1.0)));
}

#[test]
fn a12_identical_samples_is_half() {
    assert_eq!(a12(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), Some(0.5));
    assert_eq!(a12(&[5.0], &[1.0, 2.0]), Some(1.0));
    assert_eq!(a12(&[], &[1.0]), None);
}

#[test]
fn success_rate_and_censoring() {
    let hits: Vec<f64> = (1..=27).map(f64::from).collect();
    let s = BugStat::from_hits(&hits, 30);
    assert!((s.gamma - 0.9).abs() < 1e-12);
    assert_eq!(s.median_hit, Some(14.0));
    assert_eq!(s.median_censored, Some(15.5));
    let sparse = BugStat::from_hits(&[3.0], 4);
    assert_eq!(sparse.median_censored, None);
    assert_eq!(sparse.median_hit, Some(3.0));
}

proptest! {
    #[test]
    fn a12_is_antisymmetric(a in proptest::collection::vec(0u8..20, 1..15), b in proptest::collection::vec(0u8..20, 1..15)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let x = a12(&a, &b).unwrap();
        let y = a12(&b, &a).unwrap();
        prop_assert!((x + y - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn ratio_is_within_unit_interval(rounds in proptest::collection::vec(proptest::collection::vec(0u8..6, 0..4), 1..10)) {
        let rounds: Vec<Vec<String>> = rounds.into_iter().map(|r| r.into_iter().map(|x| x.to_string()).collect()).collect();
        for v in fresh_seed_ratio(&rounds).into_iter().flatten() {
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }
}
