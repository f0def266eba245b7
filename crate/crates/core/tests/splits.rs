use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use svfend_core::data::{Dataset, NewsVideoSample};
use svfend_core::eval::{event_five_fold_split, make_split, temporal_split, SplitKind};
use svfend_core::synthetic::generate_synthetic_dataset;

fn template() -> NewsVideoSample {
    generate_synthetic_dataset(2, 1, 0, 1.0)
        .unwrap()
        .dataset
        .samples()[0]
        .clone()
}

/// `sizes[e]` samples for event `e`, publish times taken from `times` in order.
fn dataset(sizes: &[usize], times: &[i64]) -> Dataset {
    let t = template();
    let mut samples = Vec::new();
    for (e, &n) in sizes.iter().enumerate() {
        for k in 0..n {
            let i = samples.len();
            let mut s = t.clone();
            s.sample_id = format!("s{i:05}");
            s.event_id = format!("ev{e:04}");
            s.label = ((e + k) % 2) as u8;
            s.publish_time = times[i % times.len()];
            samples.push(s);
        }
    }
    Dataset::new(samples).unwrap()
}

#[test]
fn fold_event_counts_for_738_events() {
    let d = dataset(&[1; 738], &[0]);
    let folds = event_five_fold_split(&d, 17).unwrap();
    let counts: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
    assert!(counts.iter().all(|c| [147, 148].contains(c)), "{counts:?}");
    assert_eq!(counts.iter().sum::<usize>(), 738);
}

#[test]
fn fewer_than_five_events_is_an_error() {
    assert!(event_five_fold_split(&dataset(&[3, 3, 3, 3], &[0]), 0).is_err());
    assert!(event_five_fold_split(&dataset(&[1; 5], &[0]), 0).is_ok());
}

#[test]
fn temporal_sizes_follow_the_rounding_rule() {
    let d = dataset(&[1; 20], &(0..20).collect::<Vec<_>>());
    let f = temporal_split(&d).unwrap();
    assert_eq!(
        (f.train.len(), f.validation.len(), f.test.len()),
        (14, 3, 3)
    );

    let d = dataset(&[2; 1827], &(0..3654).collect::<Vec<_>>());
    let f = temporal_split(&d).unwrap();
    assert_eq!(
        (f.train.len(), f.validation.len(), f.test.len()),
        (2558, 548, 548)
    );
}

#[test]
fn temporal_split_needs_seven_samples() {
    assert!(temporal_split(&dataset(&[1; 6], &[0, 1, 2, 3, 4, 5])).is_err());
    let f = temporal_split(&dataset(&[1; 7], &[0, 1, 2, 3, 4, 5, 6])).unwrap();
    assert_eq!((f.train.len(), f.validation.len(), f.test.len()), (5, 1, 1));
}

#[test]
fn temporal_split_ignores_input_order() {
    let times: Vec<i64> = (0..40).map(|i| (i * 7919) % 97).collect();
    let d = dataset(&[1; 40], &times);
    let mut shuffled = d.samples().to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let e = Dataset::new(shuffled).unwrap();
    let ids = |d: &Dataset, v: &[usize]| -> Vec<String> {
        v.iter().map(|&i| d.get(i).sample_id.clone()).collect()
    };
    let (a, b) = (temporal_split(&d).unwrap(), temporal_split(&e).unwrap());
    assert_eq!(ids(&d, &a.train), ids(&e, &b.train));
    assert_eq!(ids(&d, &a.validation), ids(&e, &b.validation));
    assert_eq!(ids(&d, &a.test), ids(&e, &b.test));
}

#[test]
fn temporal_ties_break_by_sample_id() {
    let d = dataset(&[1; 20], &[5]);
    let f = temporal_split(&d).unwrap();
    let order: Vec<&str> = f
        .train
        .iter()
        .chain(&f.validation)
        .chain(&f.test)
        .map(|&i| d.get(i).sample_id.as_str())
        .collect();
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(order, sorted);
}

#[test]
fn split_spec_is_seed_deterministic() {
    let d = dataset(&[2; 12], &[0]);
    let a = make_split(&d, SplitKind::EventFiveFold, 8).unwrap();
    let b = make_split(&d, SplitKind::EventFiveFold, 8).unwrap();
    assert_eq!(a, b);
    let c = make_split(&d, SplitKind::EventFiveFold, 9).unwrap();
    assert_ne!(a.event_folds, c.event_folds);
}

proptest! {
    #[test]
    fn five_fold_partitions_by_event(
        sizes in prop::collection::vec(1usize..5, 5..40),
        seed in any::<u64>(),
    ) {
        let d = dataset(&sizes, &[0]);
        let folds = event_five_fold_split(&d, seed).unwrap();
        let mut test_count = vec![0usize; d.len()];
        let mut events_per_fold = Vec::new();
        for f in &folds {
            let test_events: BTreeSet<&str> = f.test.iter().map(|&i| d.get(i).event_id.as_str()).collect();
            let train_events: BTreeSet<&str> = f.train.iter().map(|&i| d.get(i).event_id.as_str()).collect();
            prop_assert!(test_events.is_disjoint(&train_events));
            prop_assert_eq!(f.train.len() + f.test.len(), d.len());
            for &i in &f.test {
                test_count[i] += 1;
            }
            events_per_fold.push(test_events.len());
        }
        prop_assert!(test_count.iter().all(|&c| c == 1));
        let (lo, hi) = (events_per_fold.iter().min().unwrap(), events_per_fold.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
    }

    #[test]
    fn temporal_boundaries_are_ordered(
        times in prop::collection::vec(0i64..50, 7..120),
    ) {
        let d = dataset(&vec![1; times.len()], &times);
        let f = temporal_split(&d).unwrap();
        let n = d.len();
        let part = n * 15 / 100;
        prop_assert_eq!((f.train.len(), f.validation.len(), f.test.len()), (n - 2 * part, part, part));
        let t = |v: &[usize]| v.iter().map(|&i| d.get(i).publish_time).collect::<Vec<_>>();
        let (tr, va, te) = (t(&f.train), t(&f.validation), t(&f.test));
        prop_assert!(tr.iter().max() <= va.iter().min());
        prop_assert!(va.iter().max() <= te.iter().min());
        let spec = make_split(&d, SplitKind::Temporal, 0).unwrap();
        let (v0, t0) = spec.boundaries.unwrap();
        prop_assert_eq!(v0, *va.iter().min().unwrap());
        prop_assert_eq!(t0, *te.iter().min().unwrap());
    }

    #[test]
    fn fold_assignment_keeps_events_whole(sizes in prop::collection::vec(1usize..4, 5..25), seed in any::<u64>()) {
        let d = dataset(&sizes, &[0]);
        let spec = make_split(&d, SplitKind::EventFiveFold, seed).unwrap();
        let mut by_event: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
        for f in &spec.folds {
            for &i in &f.test {
                by_event.entry(d.get(i).event_id.as_str()).or_default().insert(f.index);
            }
        }
        prop_assert!(by_event.values().all(|s| s.len() == 1));
        for (e, s) in by_event {
            prop_assert_eq!(spec.event_folds[e], *s.iter().next().unwrap());
        }
    }
}
