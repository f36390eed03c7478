use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tokenize::{rstrip, words, Tokenize};
use super::{check_inputs, EvalReport};
use crate::error::Result;
use crate::subword::SubwordModel;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Smoothing {
    /// Each zero-match order gets precision 1 / (2^k · total), k counting
    /// the zero orders seen so far.
    #[default]
    #[serde(rename = "exp")]
    Exponential,
    #[serde(rename = "none")]
    None,
}

impl Smoothing {
    pub fn name(self) -> &'static str {
        match self {
            Smoothing::Exponential => "exp",
            Smoothing::None => "none",
        }
    }
}

impl std::str::FromStr for Smoothing {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(Smoothing::Exponential),
            "none" => Ok(Smoothing::None),
            other => Err(crate::Error::Usage(format!("unknown smoothing {other:?} (expected exp or none)"))),
        }
    }
}

/// Sufficient statistics of corpus BLEU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BleuStats {
    pub sys_len: usize,
    pub ref_len: usize,
    pub correct: [usize; MAX_ORDER],
    pub total: [usize; MAX_ORDER],
}

impl BleuStats {
    fn add(&mut self, other: &BleuStats) {
        self.sys_len += other.sys_len;
        self.ref_len += other.ref_len;
        for n in 0..MAX_ORDER {
            self.correct[n] += other.correct[n];
            self.total[n] += other.total[n];
        }
    }
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram statistics of one tokenized segment pair.
pub fn segment_stats(hyp: &str, reference: &str) -> BleuStats {
    let h: Vec<&str> = words(hyp).collect();
    let r: Vec<&str> = words(reference).collect();
    let mut stats = BleuStats {
        sys_len: h.len(),
        ref_len: r.len(),
        ..BleuStats::default()
    };
    for n in 1..=MAX_ORDER {
        let hc = ngram_counts(&h, n);
        let rc = ngram_counts(&r, n);
        stats.total[n - 1] = h.len().saturating_sub(n - 1);
        stats.correct[n - 1] = hc
            .iter()
            .map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

fn log_or_floor(p: f64) -> f64 {
    if p == 0.0 {
        -9_999_999_999.0
    } else {
        p.ln()
    }
}

/// Score and per-order precisions from summed statistics.
pub fn score_from_stats(stats: &BleuStats, smoothing: Smoothing) -> (f64, [f64; MAX_ORDER], f64) {
    let mut precisions = [0.0; MAX_ORDER];
    let bp = if stats.sys_len < stats.ref_len {
        if stats.sys_len > 0 {
            (1.0 - stats.ref_len as f64 / stats.sys_len as f64).exp()
        } else {
            0.0
        }
    } else {
        1.0
    };
    if stats.correct.iter().all(|&c| c == 0) {
        return (0.0, precisions, bp);
    }
    let mut smooth = 1.0;
    for n in 0..MAX_ORDER {
        let total = stats.total[n];
        if total == 0 {
            break;
        }
        let correct = stats.correct[n];
        if correct == 0 {
            if smoothing == Smoothing::Exponential {
                smooth *= 2.0;
                precisions[n] = 100.0 / (smooth * total as f64);
            }
        } else {
            precisions[n] = 100.0 * correct as f64 / total as f64;
        }
    }
    let mean_log = precisions.iter().map(|&p| log_or_floor(p)).sum::<f64>() / MAX_ORDER as f64;
    (bp * mean_log.exp(), precisions, bp)
}

pub(crate) fn bleu_pretokenized(
    hyps: &[String],
    refs: &[String],
    smoothing: Smoothing,
    tok_label: &str,
) -> EvalReport {
    let mut stats = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        stats.add(&segment_stats(h, r));
    }
    let (score, precisions, bp) = score_from_stats(&stats, smoothing);
    EvalReport::new(
        "BLEU",
        score,
        format!(
            "nrefs:1|case:mixed|eff:no|tok:{tok_label}|smooth:{}|version:{}",
            smoothing.name(),
            crate::VERSION
        ),
        serde_json::json!({
            "correct": stats.correct,
            "total": stats.total,
            "precisions": precisions,
            "bp": bp,
            "sys_len": stats.sys_len,
            "ref_len": stats.ref_len,
        }),
    )
}

/// Corpus BLEU with a single reference per segment.
pub fn bleu(hyps: &[String], refs: &[String], tokenize: Tokenize, smoothing: Smoothing) -> Result<EvalReport> {
    check_inputs(hyps, refs)?;
    let prep = |s: &String| tokenize.apply(rstrip(s));
    let h: Vec<String> = hyps.iter().map(prep).collect();
    let r: Vec<String> = refs.iter().map(prep).collect();
    Ok(bleu_pretokenized(&h, &r, smoothing, tokenize.name()))
}

/// BLEU over subword pieces: each line is segmented with `model`, pieces are
/// joined by single spaces, then scored without further tokenization and
/// with exponential smoothing.
pub fn spbleu(hyps: &[String], refs: &[String], model: &SubwordModel) -> Result<EvalReport> {
    check_inputs(hyps, refs)?;
    let seg = |lines: &[String]| -> Result<Vec<String>> {
        lines.iter().map(|l| Ok(model.segment(l)?.join(" "))).collect()
    };
    let h = seg(hyps)?;
    let r = seg(refs)?;
    let checksum = model.checksum();
    let short = checksum.strip_prefix("sha256:").unwrap_or(checksum);
    let mut report = bleu_pretokenized(&h, &r, Smoothing::Exponential, &format!("spm-{}", &short[..16.min(short.len())]));
    report.metric = "spBLEU".into();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_is_hundred() {
        let x = lines(&["the cat sat on the mat", "a b c d e"]);
        let r = bleu(&x, &x, Tokenize::ThirteenA, Smoothing::Exponential).unwrap();
        assert!((r.score - 100.0).abs() < 1e-9);
    }

    #[test]
    fn no_unigram_match_is_zero() {
        let h = lines(&["x y z w"]);
        let r = lines(&["a b c d"]);
        assert_eq!(bleu(&h, &r, Tokenize::None, Smoothing::None).unwrap().score, 0.0);
        assert_eq!(bleu(&h, &r, Tokenize::None, Smoothing::Exponential).unwrap().score, 0.0);
    }

    #[test]
    fn exp_smoothing_on_missing_four_grams() {
        // 3 tokens: no 4-grams at all, so the loop stops at order 4 and the
        // zero precision annihilates the score
        let x = lines(&["a b c"]);
        assert_eq!(bleu(&x, &x, Tokenize::None, Smoothing::Exponential).unwrap().score, 0.0);
        // 4 tokens, one wrong: 3/4, 2/3, 1/2, smoothed 1/(2·1)
        let h = lines(&["a b c x"]);
        let r = lines(&["a b c d"]);
        let got = bleu(&h, &r, Tokenize::None, Smoothing::Exponential).unwrap().score;
        let want = 100.0 * (0.75f64 * (2.0 / 3.0) * 0.5 * 0.5).powf(0.25);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn brevity_penalty() {
        let h = lines(&["a b c d"]);
        let r = lines(&["a b c d e f g h"]);
        let rep = bleu(&h, &r, Tokenize::None, Smoothing::Exponential).unwrap();
        assert!((rep.counts["bp"].as_f64().unwrap() - (1.0f64 - 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(bleu(&[], &[], Tokenize::None, Smoothing::None).is_err());
        assert!(bleu(&lines(&["a"]), &lines(&["a", "b"]), Tokenize::None, Smoothing::None).is_err());
    }
}
