//! Algebraic laws of the rule and semantic filters on large random corpora.

use std::collections::BTreeMap;

use domainsmith::corpus::SegmentPair;
use domainsmith::filters::{apply_rules, global_filter, semantic_filter, DropReason, RuleConfig, SemanticConfig};
use domainsmith::rng::SeededRng;
use domainsmith::services::{EmbedScript, MockScript, ServiceEndpoint, ServiceSet};
use proptest::prelude::*;

const WORDS: [&str; 12] = [
    "health", "virus", "mask", "clinic", "water", "fever", "hands", "test", "care", "doctor", "risk", "safe",
];

fn sentence(rng: &mut SeededRng, len: usize) -> String {
    (0..len).map(|_| WORDS[rng.below(WORDS.len() as u64) as usize]).collect::<Vec<_>>().join(" ")
}

/// Random pairs exercising every rule. `origin` carries the input index.
fn corpus(seed: u64, n: usize) -> Vec<SegmentPair> {
    let mut rng = SeededRng::new(seed);
    let mut out: Vec<SegmentPair> = Vec::with_capacity(n);
    for i in 0..n {
        let (mut s, mut t) = match rng.below(10) {
            0 if !out.is_empty() => {
                let prev = &out[rng.below(out.len() as u64) as usize];
                (prev.source.clone(), prev.target.clone())
            }
            1 => {
                let len = 1 + rng.below(6) as usize;
                let s = sentence(&mut rng, len);
                (s.clone(), s)
            }
            2 => {
                let len = 7 + rng.below(4) as usize;
                (sentence(&mut rng, 2), sentence(&mut rng, len))
            }
            3 => {
                let len = 195 + rng.below(10) as usize;
                (sentence(&mut rng, len), sentence(&mut rng, 200))
            }
            _ => {
                let a = 1 + rng.below(12) as usize;
                let b = (a + rng.below(4) as usize).max(1);
                (sentence(&mut rng, a), sentence(&mut rng, b))
            }
        };
        match rng.below(12) {
            0 => s = format!("<b>{s}</b>"),
            1 => t = format!("<p>{t}<br/></p>"),
            2 => s = "<img src=x/>".to_string(),
            3 => t = format!(" {t} "),
            _ => {}
        }
        out.push(SegmentPair::new(s, t, i.to_string()).unwrap());
    }
    out
}

fn index(p: &SegmentPair) -> usize {
    p.origin.parse().unwrap()
}

#[test]
fn rule_laws_on_ten_thousand_pairs() {
    for seed in [1u64, 2, 3] {
        let input = corpus(seed, 10_000);
        let cfg = RuleConfig::default();
        let (kept, report) = apply_rules("rules", input.clone(), &cfg).unwrap();

        assert_eq!(report.input_count, 10_000);
        assert!(report.is_conserved());
        assert_eq!(report.kept_count, kept.len());
        for reason in DropReason::RULES {
            assert!(report.dropped_for(reason) > 0, "seed {seed}: no {reason:?} drops");
        }

        let idx: Vec<usize> = kept.iter().map(index).collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]), "kept pairs out of input order");

        let (again, report2) = apply_rules("rules", kept.clone(), &cfg).unwrap();
        assert_eq!(again, kept, "apply_rules is not idempotent");
        assert_eq!(report2.dropped_total(), 0);
        assert!(report2.is_conserved());
    }
}

#[test]
fn tightening_never_keeps_more() {
    let input = corpus(4, 10_000);
    let mut last = usize::MAX;
    for ratio in [3.0, 2.5, 2.0, 1.5, 1.0] {
        let cfg = RuleConfig {
            max_length_ratio: ratio,
            ..RuleConfig::default()
        };
        let (kept, _) = apply_rules("r", input.clone(), &cfg).unwrap();
        assert!(kept.len() <= last);
        last = kept.len();
    }
    let mut last = usize::MAX;
    for max_words in [250, 200, 100, 10, 3, 1] {
        let cfg = RuleConfig {
            max_words,
            ..RuleConfig::default()
        };
        let (kept, _) = apply_rules("r", input.clone(), &cfg).unwrap();
        assert!(kept.len() <= last);
        last = kept.len();
    }
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Pairs `s{i}`/`t{i}` with scripted embeddings. Pair 0 sits exactly on the
/// 0.45 boundary and pair 1 just below it.
fn scripted(n: usize, seed: u64) -> (Vec<SegmentPair>, MockScript) {
    let mut rng = SeededRng::new(seed);
    let mut responses = BTreeMap::new();
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = match i {
            0 => (vec![1.0, 0.0, 0.0, 0.0, 0.0], vec![9.0, 17.0, 5.0, 2.0, 1.0]),
            1 => (vec![1.0, 0.0, 0.0, 0.0, 0.0], vec![8.998, 17.0, 5.0, 2.0, 1.0]),
            _ => {
                let a: Vec<f64> = (0..5).map(|_| rng.unit_f64() * 2.0 - 1.0).collect();
                let b: Vec<f64> = a.iter().map(|x| x + (rng.unit_f64() * 2.0 - 1.0) * 1.2).collect();
                (a, b)
            }
        };
        responses.insert(format!("s{i}"), a);
        responses.insert(format!("t{i}"), b);
        pairs.push(SegmentPair::new(format!("s{i}"), format!("t{i}"), i.to_string()).unwrap());
    }
    let script = MockScript {
        embed: EmbedScript { responses, dim: 5 },
        ..MockScript::default()
    };
    (pairs, script)
}

#[test]
fn semantic_keep_set_is_threshold_set() {
    let n = 10_000;
    let (pairs, script) = scripted(n, 17);
    let expected: Vec<usize> = (0..n)
        .filter(|&i| cos(&script.embed.responses[&format!("s{i}")], &script.embed.responses[&format!("t{i}")]) >= 0.45)
        .collect();
    assert!(expected.contains(&0));
    assert!(!expected.contains(&1));
    assert!(expected.len() > n / 10 && expected.len() < n * 9 / 10);

    let (services, _) = ServiceSet::mock(script, ServiceEndpoint::new("mock://")).unwrap();
    let cfg = SemanticConfig {
        log_similarities: true,
        ..SemanticConfig::default()
    };
    let out = semantic_filter("sem", pairs.clone(), &cfg, &services.embed).unwrap();
    let kept: Vec<usize> = out.kept.iter().map(index).collect();
    assert_eq!(kept, expected);
    assert!(out.report.is_conserved());
    assert_eq!(out.report.dropped_for(DropReason::BelowThreshold), n - expected.len());

    let sims = out.similarities.unwrap();
    assert_eq!(sims[0], 0.45);
    let from_log: Vec<usize> = (0..n).filter(|&i| sims[i] >= 0.45).collect();
    assert_eq!(from_log, kept);

    let again = semantic_filter("sem", out.kept.clone(), &cfg, &services.embed).unwrap();
    assert_eq!(again.kept, out.kept);

    let everything = SemanticConfig {
        threshold: -1.0,
        ..SemanticConfig::default()
    };
    assert_eq!(semantic_filter("sem", pairs, &everything, &services.embed).unwrap().kept.len(), n);
}

#[test]
fn global_dedup_keeps_first_corpus_copy() {
    let a = corpus(8, 100);
    let b = corpus(9, 100);
    let shared = SegmentPair::new("shared segment here", "segment partagé ici", "B").unwrap();
    let mut a2 = a.clone();
    a2.push(SegmentPair::new("shared segment here", "segment partagé ici", "A").unwrap());
    let mut b2 = b.clone();
    b2.insert(0, shared);
    let cfg = RuleConfig::default();
    let (kept, report) = global_filter("g", vec![a2.into_iter(), b2.into_iter()], &cfg, None).unwrap();
    let survivors: Vec<&SegmentPair> = kept.iter().filter(|p| p.source == "shared segment here").collect();
    assert_eq!(survivors.len(), 1);
    assert_eq!(survivors[0].origin, "A");
    assert!(report.is_conserved());

    let tagged = |c: &[SegmentPair], tag: &str| -> Vec<SegmentPair> {
        c.iter()
            .map(|p| SegmentPair::new(format!("{tag} {}", p.source), format!("{tag} {}", p.target), &p.origin).unwrap())
            .collect()
    };
    let (da, db) = (tagged(&a, "x"), tagged(&b, "y"));
    let separate = apply_rules("a", da.clone(), &cfg).unwrap().1.kept_count + apply_rules("b", db.clone(), &cfg).unwrap().1.kept_count;
    let (_, joint) = global_filter("g", vec![da.into_iter(), db.into_iter()], &cfg, None).unwrap();
    assert_eq!(joint.kept_count, separate);

    let (none, empty) = global_filter("g", Vec::<std::vec::IntoIter<SegmentPair>>::new(), &cfg, None).unwrap();
    assert!(none.is_empty());
    assert_eq!(empty.input_count, 0);
}

fn arb_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            prop::sample::select(WORDS.to_vec()).prop_map(str::to_owned),
            Just("<i>".to_owned()),
            Just("</i>".to_owned()),
            Just("<".to_owned()),
            Just(">".to_owned()),
            "[a-zé]{1,6}",
        ],
        0..8,
    )
    .prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rules_laws_hold_for_arbitrary_text(
        raw in prop::collection::vec((arb_text(), arb_text()), 0..60),
        ratio in 1.0f64..4.0,
        max_words in 1usize..10,
    ) {
        let pairs: Vec<SegmentPair> = raw
            .into_iter()
            .enumerate()
            .filter_map(|(i, (s, t))| SegmentPair::new(s, t, i.to_string()).ok())
            .collect();
        let cfg = RuleConfig { max_length_ratio: ratio, max_words, ..RuleConfig::default() };
        let (kept, report) = apply_rules("p", pairs.clone(), &cfg).unwrap();
        prop_assert!(report.is_conserved());
        prop_assert_eq!(report.input_count, pairs.len());
        let idx: Vec<usize> = kept.iter().map(index).collect();
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        let (again, _) = apply_rules("p", kept.clone(), &cfg).unwrap();
        prop_assert_eq!(again, kept);
    }
}
