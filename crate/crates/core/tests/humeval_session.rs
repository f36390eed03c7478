use std::collections::BTreeMap;
use std::io::Cursor;

use domainsmith::corpus::SegmentPair;
use domainsmith::humeval::{
    aggregate, load_records, percentage_of, presentation_order, round1, run_session, sample_eval_set, EvalItem,
    RatingRecord, RatingScale, SessionConfig,
};
use domainsmith::Error;
use proptest::prelude::*;

/// 50 ratings summing to `sum`, as evenly spread as the scale allows.
fn ratings_with_sum(system: &str, sum: u32) -> Vec<RatingRecord> {
    let base = sum / 50;
    let extra = sum % 50;
    (0..50)
        .map(|i| RatingRecord {
            item_id: i,
            system_id: system.into(),
            rating: RatingScale::try_from((base + u32::from(i < extra as usize)) as u8).unwrap(),
            rater_id: "r1".into(),
            timestamp: 0,
        })
        .collect()
}

#[test]
fn known_mean_percentage_pairs() {
    let cases = [
        ("baseline", 174, 3.48, 87.0),
        ("setup1_aren", 187, 3.74, 93.5),
        ("setup1_enar", 189, 3.78, 94.5),
        ("setup2_aren", 180, 3.60, 90.0),
        ("setup2_enar", 177, 3.54, 88.5),
    ];
    let records: Vec<RatingRecord> = cases.iter().flat_map(|(s, sum, _, _)| ratings_with_sum(s, *sum)).collect();
    let report = aggregate(&records).unwrap();
    for (system, _, mean, pct) in cases {
        let score = &report.systems[system];
        assert_eq!(score.count, 50);
        assert!((score.mean - mean).abs() < 1e-12, "{system}: {}", score.mean);
        assert_eq!(score.percentage, pct, "{system}");
        assert_eq!(round1(percentage_of(mean)), pct);
    }
}

#[test]
fn perfect_ratings_give_one_hundred() {
    let records: Vec<RatingRecord> = ratings_with_sum("s", 200);
    let score = &aggregate(&records).unwrap().systems["s"];
    assert_eq!((score.mean, score.percentage), (4.0, 100.0));
}

fn test_set(n: usize) -> Vec<SegmentPair> {
    (0..n)
        .map(|i| SegmentPair::new(format!("source {i}"), format!("reference {i}"), "test").unwrap())
        .collect()
}

#[test]
fn eval_set_sampling() {
    let test = test_set(2062);
    let items = sample_eval_set(&test, 50, 3).unwrap();
    assert_eq!(items.len(), 50);
    let mut ids: Vec<usize> = items.iter().map(|i| i.item_id).collect();
    for it in &items {
        assert_eq!(it.source, test[it.item_id].source);
        assert_eq!(it.reference, test[it.item_id].target);
    }
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 50);
    assert_eq!(sample_eval_set(&test, 50, 3).unwrap(), items);
    assert_ne!(sample_eval_set(&test, 50, 4).unwrap(), items);
    assert!(sample_eval_set(&test, 0, 3).unwrap().is_empty());
    assert!(matches!(sample_eval_set(&test[..10], 11, 3), Err(Error::Size { .. })));
}

fn two_systems(items: &[EvalItem]) -> BTreeMap<String, Vec<String>> {
    let max = items.iter().map(|i| i.item_id).max().unwrap_or(0) + 1;
    ["sysBaseline", "sysMixFT"]
        .iter()
        .map(|s| (s.to_string(), (0..max).map(|i| format!("translation {i} by {}", &s[3..])).collect()))
        .collect()
}

fn answers(n: usize) -> String {
    (0..n).map(|i| format!("{}\n", 1 + i % 4)).collect()
}

#[test]
fn full_session_writes_one_record_per_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let items = sample_eval_set(&test_set(2062), 50, 1).unwrap();
    let outputs = two_systems(&items);
    let path = dir.path().join("ratings.jsonl");
    let mut tick = 1_700_000_000u64;
    let mut cfg = SessionConfig::new("rater", 9, &path).with_clock(move || {
        tick += 1;
        tick
    });
    let mut out = Vec::new();
    let outcome = run_session(&items, &outputs, &mut cfg, &mut Cursor::new(answers(100)), &mut out).unwrap();
    assert!(outcome.completed);
    assert_eq!(outcome.records.len(), 100);
    assert_eq!(load_records(&path).unwrap(), outcome.records);

    let screen = String::from_utf8(out).unwrap();
    assert!(!screen.contains("sysBaseline") && !screen.contains("sysMixFT"));
    assert!(screen.contains("  A: ") && screen.contains("  B: "));

    let report = aggregate(&outcome.records).unwrap();
    assert_eq!(report.systems.len(), 2);
    assert!(report.systems.values().all(|s| s.count == 50));
}

#[test]
fn interrupted_session_resumes_where_it_stopped() {
    let dir = tempfile::tempdir().unwrap();
    let items = sample_eval_set(&test_set(500), 50, 2).unwrap();
    let outputs = two_systems(&items);
    let path = dir.path().join("ratings.jsonl");

    let mut cfg = SessionConfig::new("rater", 5, &path);
    let first = run_session(&items, &outputs, &mut cfg, &mut Cursor::new(answers(60)), &mut Vec::new()).unwrap();
    assert!(!first.completed);
    assert_eq!(first.records.len(), 60);
    assert_eq!(first.items_remaining, 20);

    let mut out = Vec::new();
    let second = run_session(&items, &outputs, &mut cfg, &mut Cursor::new(answers(40)), &mut out).unwrap();
    assert!(second.completed);
    assert_eq!(second.records.len(), 100);
    let screen = String::from_utf8(out).unwrap();
    assert!(screen.contains("Resuming: 30 of 50"));
    assert_eq!(screen.matches("Rating for").count(), 40);
    assert!(aggregate(&second.records).is_ok());
}

#[test]
fn invalid_keys_are_asked_again() {
    let dir = tempfile::tempdir().unwrap();
    let items = sample_eval_set(&test_set(5), 1, 0).unwrap();
    let outputs = two_systems(&items);
    let mut cfg = SessionConfig::new("r", 0, dir.path().join("r.jsonl"));
    let mut out = Vec::new();
    let input = "5\n\nx\n0\n3\n4\n";
    let outcome = run_session(&items, &outputs, &mut cfg, &mut Cursor::new(input), &mut out).unwrap();
    assert!(outcome.completed);
    let mut got: Vec<u8> = outcome.records.iter().map(|r| r.rating.value()).collect();
    got.sort();
    assert_eq!(got, vec![3, 4]);
    assert_eq!(String::from_utf8(out).unwrap().matches("Please enter 1, 2, 3 or 4.").count(), 4);
}

#[test]
fn label_order_depends_on_seed() {
    let systems: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let orders = |seed| (0..50).map(|item| presentation_order(&systems, seed, item)).collect::<Vec<_>>();
    let (x, y) = (orders(1), orders(2));
    assert_ne!(x, y);
    assert!(x.iter().any(|o| o != &x[0]), "order never varies across items");
    assert_eq!(orders(1), x);
}

#[test]
fn duplicate_ratings_are_rejected() {
    let mut records = ratings_with_sum("s", 150);
    records.push(records[0].clone());
    assert!(aggregate(&records).is_err());
}

proptest! {
    #[test]
    fn percentage_is_twenty_five_times_the_mean(
        ratings in prop::collection::vec(1u8..=4, 1..200)
    ) {
        let records: Vec<RatingRecord> = ratings
            .iter()
            .enumerate()
            .map(|(i, r)| RatingRecord {
                item_id: i,
                system_id: "s".into(),
                rating: RatingScale::try_from(*r).unwrap(),
                rater_id: "r".into(),
                timestamp: 0,
            })
            .collect();
        let score = &aggregate(&records).unwrap().systems["s"];
        let mean = ratings.iter().map(|r| *r as f64).sum::<f64>() / ratings.len() as f64;
        prop_assert!((score.mean - mean).abs() < 1e-12);
        prop_assert_eq!(percentage_of(score.mean), score.mean * 25.0);
        prop_assert_eq!(score.percentage, round1(score.mean * 25.0));
    }
}
