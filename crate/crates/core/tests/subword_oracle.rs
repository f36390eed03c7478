//! Viterbi segmentation checked against exhaustive enumeration.

use domainsmith::rng::SeededRng;
use domainsmith::subword::{desegment, SubwordModel};

const MARK: char = '\u{2581}';

const PIECES: [&str; 20] = [
    "▁", "a", "b", "c", "▁a", "▁b", "▁c", "ab", "ba", "bc", "ca", "aa", "bb", "cc", "ac", "abc", "▁ab", "bca",
    "cab", "abca",
];

fn toy_model(seed: u64) -> SubwordModel {
    let mut rng = SeededRng::new(seed);
    let rows = PIECES
        .iter()
        .map(|p| (p.to_string(), -(0.05 + 8.0 * rng.unit_f64())))
        .collect();
    SubwordModel::from_pieces(rows, true).unwrap()
}

/// Best total log-probability over all 2^(n-1) ways of cutting `chars`.
fn brute_force_best(model: &SubwordModel, chars: &[char]) -> f64 {
    let n = chars.len();
    let span: Vec<Vec<Option<f64>>> = (0..n)
        .map(|i| (0..=n).map(|j| (j > i).then(|| model.score(&chars[i..j].iter().collect::<String>())).flatten()).collect())
        .collect();
    let mut best = f64::NEG_INFINITY;
    'cuts: for mask in 0u32..(1 << (n - 1)) {
        let mut total = 0.0;
        let mut start = 0;
        for end in 1..=n {
            if end == n || mask & (1 << (end - 1)) != 0 {
                match span[start][end] {
                    Some(s) => total += s,
                    None => continue 'cuts,
                }
                start = end;
            }
        }
        best = best.max(total);
    }
    best
}

fn all_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for &c in alphabet {
                let mut t = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[test]
fn viterbi_matches_exhaustive_enumeration() {
    let strings = all_strings(&['a', 'b', 'c'], 8);
    assert_eq!(strings.len(), 3 + 9 + 27 + 81 + 243 + 729 + 2187 + 6561);
    for seed in [1, 2, 3] {
        let model = toy_model(seed);
        let mut agree = 0;
        for s in &strings {
            let chars: Vec<char> = std::iter::once(MARK).chain(s.chars()).collect();
            let (pieces, score) = model.segment_scored(s).unwrap();
            let best = brute_force_best(&model, &chars);
            assert!((score - best).abs() < 1e-9, "{s}: viterbi {score} vs exhaustive {best}");
            assert!((model.score_pieces(&pieces).unwrap() - score).abs() < 1e-9);
            assert_eq!(pieces.concat(), chars.iter().collect::<String>());
            agree += 1;
        }
        assert_eq!(agree, strings.len());
    }
}

#[test]
fn single_dominant_piece_wins() {
    let model = SubwordModel::from_pieces(
        vec![
            ("▁abca".into(), -0.5),
            ("▁".into(), -1.0),
            ("a".into(), -1.0),
            ("b".into(), -1.0),
            ("c".into(), -1.0),
        ],
        true,
    )
    .unwrap();
    assert_eq!(model.segment("abca").unwrap(), vec!["▁abca"]);
}

#[test]
fn digits_are_split_individually() {
    let rows = vec![
        ("▁".into(), -1.0),
        ("2".into(), -2.0),
        ("0".into(), -2.0),
        ("3".into(), -2.0),
        ("20".into(), -0.1),
        ("2023".into(), -0.1),
    ];
    let model = SubwordModel::from_pieces(rows, true).unwrap();
    assert_eq!(model.segment("2023").unwrap(), vec!["▁", "2", "0", "2", "3"]);
}

#[test]
fn random_ascii_round_trips() {
    let mut rows: Vec<(String, f64)> = (0x20u8..0x7f)
        .filter(|&b| b != b' ')
        .map(|b| ((b as char).to_string(), -5.0))
        .collect();
    rows.push((MARK.to_string(), -2.0));
    rows.extend(["▁the", "▁a", "in", "er", "on"].iter().map(|p| (p.to_string(), -3.0)));
    let model = SubwordModel::from_pieces(rows, true).unwrap();
    let mut rng = SeededRng::new(99);
    for _ in 0..1000 {
        let len = 1 + rng.below(30) as usize;
        let mut s: String = (0..len).map(|_| (0x21 + rng.below(94) as u8) as char).collect();
        if rng.below(2) == 0 {
            s = format!("{s} the {s}");
        }
        let pieces = model.segment(&s).unwrap();
        assert_eq!(desegment(&pieces).unwrap(), s);
    }
}
