use std::collections::HashMap;
use std::hash::Hash;

use super::tokenize::{is_space, words};
use super::{check_inputs, EvalReport};
use crate::error::Result;

pub const CHAR_ORDER: usize = 6;
pub const WORD_ORDER: usize = 2;
pub const BETA: f64 = 2.0;
const ORDERS: usize = CHAR_ORDER + WORD_ORDER;

const PUNCTS: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

/// Per order: (hypothesis n-grams, reference n-grams, matches).
pub type ChrfStats = [[usize; 3]; ORDERS];

/// Word tokens with one leading or trailing punctuation mark split off.
fn split_punct(sent: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for w in words(sent) {
        let first = w.chars().next().expect("words are non-empty");
        let Some((last_at, last)) = w.char_indices().next_back() else { continue };
        if last_at == 0 {
            out.push(w);
        } else if PUNCTS.contains(last) {
            out.push(&w[..last_at]);
            out.push(&w[last_at..]);
        } else if PUNCTS.contains(first) {
            let cut = first.len_utf8();
            out.push(&w[..cut]);
            out.push(&w[cut..]);
        } else {
            out.push(w);
        }
    }
    out
}

fn counts<T: Hash + Eq>(items: impl Iterator<Item = T>) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for i in items {
        *m.entry(i).or_insert(0) += 1;
    }
    m
}

fn match_stats<T: Hash + Eq>(h: &HashMap<T, usize>, r: &HashMap<T, usize>) -> [usize; 3] {
    let hyp: usize = h.values().sum();
    let rf: usize = r.values().sum();
    let matches = h
        .iter()
        .map(|(g, &c)| r.get(g).map_or(0, |&rc| c.min(rc)))
        .sum();
    [if rf > 0 { hyp } else { 0 }, rf, matches]
}

pub fn segment_stats(hyp: &str, reference: &str) -> ChrfStats {
    let mut stats = [[0; 3]; ORDERS];
    let hc: Vec<char> = hyp.chars().filter(|c| !is_space(*c)).collect();
    let rc: Vec<char> = reference.chars().filter(|c| !is_space(*c)).collect();
    for n in 1..=CHAR_ORDER {
        let h = counts(hc.windows(n));
        let r = counts(rc.windows(n));
        stats[n - 1] = match_stats(&h, &r);
    }
    let hw = split_punct(hyp);
    let rw = split_punct(reference);
    for n in 1..=WORD_ORDER {
        let h = counts(hw.windows(n));
        let r = counts(rw.windows(n));
        stats[CHAR_ORDER + n - 1] = match_stats(&h, &r);
    }
    stats
}

/// F-beta of precision and recall averaged over the orders where both sides
/// have n-grams, ×100.
pub fn f_score(stats: &ChrfStats) -> f64 {
    let factor = BETA * BETA;
    let (mut prec, mut rec, mut effective) = (0.0, 0.0, 0usize);
    for &[n_hyp, n_ref, n_match] in stats {
        if n_hyp > 0 && n_ref > 0 {
            prec += n_match as f64 / n_hyp as f64;
            rec += n_match as f64 / n_ref as f64;
            effective += 1;
        }
    }
    if effective == 0 {
        return 0.0;
    }
    prec /= effective as f64;
    rec /= effective as f64;
    if prec + rec == 0.0 {
        return 0.0;
    }
    100.0 * (1.0 + factor) * prec * rec / (factor * prec + rec)
}

pub fn sentence_chrfpp(hyp: &str, reference: &str) -> f64 {
    f_score(&segment_stats(hyp, reference))
}

/// Corpus chrF++: n-gram statistics are summed over all segments before the
/// F-score is taken.
pub fn chrfpp(hyps: &[String], refs: &[String]) -> Result<EvalReport> {
    check_inputs(hyps, refs)?;
    let mut total = [[0usize; 3]; ORDERS];
    for (h, r) in hyps.iter().zip(refs) {
        let s = segment_stats(h, r);
        for (t, x) in total.iter_mut().zip(&s) {
            for k in 0..3 {
                t[k] += x[k];
            }
        }
    }
    Ok(EvalReport::new(
        "chrF2++",
        f_score(&total),
        format!("nrefs:1|case:mixed|eff:yes|nc:{CHAR_ORDER}|nw:{WORD_ORDER}|space:no|version:{}", crate::VERSION),
        serde_json::json!({ "orders": total }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn punctuation_split() {
        assert_eq!(split_punct("(hi) a, .x ?"), vec!["(hi", ")", "a", ",", ".", "x", "?"]);
    }

    #[test]
    fn identical_and_disjoint() {
        assert!((sentence_chrfpp("public health", "public health") - 100.0).abs() < 1e-9);
        assert_eq!(sentence_chrfpp("abc", "xyz"), 0.0);
        assert_eq!(sentence_chrfpp("", "xyz"), 0.0);
    }
}
