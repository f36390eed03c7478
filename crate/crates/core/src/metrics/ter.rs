//! Translation edit rate with tercom-style greedy block shifts.
//!
//! The search mirrors the reference implementation closely, heuristics
//! included: edit distance is computed in a beam around the length-scaled
//! diagonal, shift candidates are limited in size and distance, and at most
//! 1000 candidates are evaluated per segment.

use serde::{Deserialize, Serialize};

use super::tokenize::{rstrip, tercom_tokenize, words};
use super::{check_inputs, EvalReport};
use crate::error::{Error, Result};

const MAX_SHIFT_SIZE: usize = 10;
const MAX_SHIFT_DIST: usize = 50;
const MAX_SHIFT_CANDIDATES: usize = 1000;
const BEAM_WIDTH: usize = 25;
const INFINITY: i64 = 10_000_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Nop,
    Sub,
    Ins,
    Del,
    Undef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerConfig {
    pub case_sensitive: bool,
    /// Tercom punctuation and entity normalization.
    pub normalized: bool,
    /// Disabling shifts yields plain word edit distance.
    pub shifts: bool,
}

impl Default for TerConfig {
    fn default() -> Self {
        Self {
            case_sensitive: true,
            normalized: false,
            shifts: true,
        }
    }
}

impl TerConfig {
    pub fn signature(&self) -> String {
        let mut sig = format!(
            "nrefs:1|case:{}|tok:tercom|norm:{}|punct:yes|asian:no",
            if self.case_sensitive { "mixed" } else { "lc" },
            if self.normalized { "yes" } else { "no" },
        );
        if !self.shifts {
            sig.push_str("|shift:no");
        }
        sig.push_str(&format!("|version:{}", crate::VERSION));
        sig
    }
}

/// Edit distance from a hypothesis to a fixed reference.
struct BeamEditDistance<'a> {
    reference: &'a [&'a str],
}

impl<'a> BeamEditDistance<'a> {
    fn compute(&self, hyp: &[&str]) -> (i64, Vec<Op>) {
        let n_h = hyp.len();
        let n_r = self.reference.len();
        let mut dist: Vec<Vec<(i64, Op)>> = Vec::with_capacity(n_h + 1);
        dist.push((0..=n_r).map(|j| (j as i64, Op::Ins)).collect());
        let ratio = if n_h == 0 { 1.0 } else { n_r as f64 / n_h as f64 };
        let beam = if (BEAM_WIDTH as f64) < ratio / 2.0 {
            (ratio / 2.0 + BEAM_WIDTH as f64).ceil() as usize
        } else {
            BEAM_WIDTH
        };
        for i in 1..=n_h {
            let diag = (i as f64 * ratio).floor() as usize;
            let min_j = diag.saturating_sub(beam);
            let max_j = if i == n_h { n_r + 1 } else { (n_r + 1).min(diag + beam) };
            let mut row = vec![(INFINITY, Op::Undef); n_r + 1];
            let prev = &dist[i - 1];
            for j in min_j..max_j {
                if j == 0 {
                    row[0] = (prev[0].0 + 1, Op::Del);
                    continue;
                }
                let (cost_sub, op_sub) = if hyp[i - 1] == self.reference[j - 1] {
                    (0, Op::Nop)
                } else {
                    (1, Op::Sub)
                };
                let candidates = [
                    (prev[j - 1].0 + cost_sub, op_sub),
                    (prev[j].0 + 1, Op::Del),
                    (row[j - 1].0 + 1, Op::Ins),
                ];
                for (cost, op) in candidates {
                    if row[j].0 > cost {
                        row[j] = (cost, op);
                    }
                }
            }
            dist.push(row);
        }
        let mut trace = Vec::new();
        let (mut i, mut j) = (n_h, n_r);
        while i > 0 || j > 0 {
            let op = dist[i][j].1;
            trace.push(op);
            match op {
                Op::Nop | Op::Sub => {
                    i -= 1;
                    j -= 1;
                }
                Op::Ins => j -= 1,
                Op::Del => i -= 1,
                Op::Undef => unreachable!("trace walked outside the beam"),
            }
        }
        trace.reverse();
        (dist[n_h][n_r].0, trace)
    }
}

struct Alignment {
    /// reference position → hypothesis position (may be -1)
    align: Vec<Option<i64>>,
    ref_err: Vec<u8>,
    hyp_err: Vec<u8>,
}

/// Alignment of the flipped trace, i.e. rewriting the reference into the
/// hypothesis: insertions and deletions swap roles.
fn trace_to_alignment(trace: &[Op], n_ref: usize) -> Alignment {
    let (mut pos_h, mut pos_r) = (-1i64, -1i64);
    let mut out = Alignment {
        align: vec![None; n_ref],
        ref_err: Vec::new(),
        hyp_err: Vec::new(),
    };
    for &op in trace {
        let flipped = match op {
            Op::Ins => Op::Del,
            Op::Del => Op::Ins,
            other => other,
        };
        match flipped {
            Op::Nop | Op::Sub => {
                pos_h += 1;
                pos_r += 1;
                out.align[pos_r as usize] = Some(pos_h);
                let e = u8::from(flipped == Op::Sub);
                out.hyp_err.push(e);
                out.ref_err.push(e);
            }
            Op::Ins => {
                pos_h += 1;
                out.hyp_err.push(1);
            }
            Op::Del => {
                pos_r += 1;
                out.align[pos_r as usize] = Some(pos_h);
                out.ref_err.push(1);
            }
            Op::Undef => unreachable!(),
        }
    }
    out
}

fn perform_shift<'a>(words: &[&'a str], start: usize, length: usize, target: usize) -> Vec<&'a str> {
    let mut out = Vec::with_capacity(words.len());
    if target < start {
        out.extend_from_slice(&words[..target]);
        out.extend_from_slice(&words[start..start + length]);
        out.extend_from_slice(&words[target..start]);
        out.extend_from_slice(&words[start + length..]);
    } else if target > start + length {
        out.extend_from_slice(&words[..start]);
        out.extend_from_slice(&words[start + length..target]);
        out.extend_from_slice(&words[start..start + length]);
        out.extend_from_slice(&words[target..]);
    } else {
        out.extend_from_slice(&words[..start]);
        out.extend_from_slice(&words[start + length..length + target]);
        out.extend_from_slice(&words[start..start + length]);
        out.extend_from_slice(&words[length + target..]);
    }
    out
}

/// Every (hyp start, ref start, length) where the blocks agree.
fn shifted_pairs(h: &[&str], r: &[&str]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for sh in 0..h.len() {
        for sr in 0..r.len() {
            if sh.abs_diff(sr) > MAX_SHIFT_DIST {
                continue;
            }
            let mut length = 0;
            while h[sh + length] == r[sr + length] && length < MAX_SHIFT_SIZE {
                length += 1;
                out.push((sh, sr, length));
                if h.len() == sh + length || r.len() == sr + length {
                    break;
                }
            }
        }
    }
    out
}

struct ShiftOutcome<'a> {
    delta: i64,
    words: Vec<&'a str>,
}

fn best_shift<'a>(
    h: &[&'a str],
    r: &[&str],
    ed: &BeamEditDistance,
    checked: &mut usize,
) -> Option<ShiftOutcome<'a>> {
    let (pre_score, trace) = ed.compute(h);
    let al = trace_to_alignment(&trace, r.len());
    // (delta, length, -start_h, -idx)
    let mut best: Option<((i64, usize, i64, i64), Vec<&'a str>)> = None;
    for (sh, sr, length) in shifted_pairs(h, r) {
        if al.hyp_err[sh..sh + length].iter().all(|&e| e == 0) {
            continue;
        }
        if al.ref_err[sr..sr + length].iter().all(|&e| e == 0) {
            continue;
        }
        let aligned = al.align[sr].expect("every reference position is aligned");
        if sh as i64 <= aligned && aligned < (sh + length) as i64 {
            continue;
        }
        let mut prev_idx: i64 = -1;
        for offset in -1..length as i64 {
            let pos = sr as i64 + offset;
            let idx = if pos == -1 {
                0
            } else if (pos as usize) < r.len() {
                al.align[pos as usize].expect("aligned") + 1
            } else {
                break;
            };
            if idx == prev_idx {
                continue;
            }
            prev_idx = idx;
            let shifted = perform_shift(h, sh, length, idx as usize);
            let key = (pre_score - ed.compute(&shifted).0, length, -(sh as i64), -idx);
            *checked += 1;
            let better = match &best {
                None => true,
                Some((k, w)) => (key, &shifted) > (*k, w),
            };
            if better {
                best = Some((key, shifted));
            }
        }
        if *checked >= MAX_SHIFT_CANDIDATES {
            break;
        }
    }
    best.map(|(k, words)| ShiftOutcome { delta: k.0, words })
}

/// Number of edits (shifts included) turning `hyp` into `reference`.
pub fn edits(hyp: &[&str], reference: &[&str], shifts: bool) -> usize {
    if reference.is_empty() {
        return hyp.len();
    }
    let ed = BeamEditDistance { reference };
    let mut current: Vec<&str> = hyp.to_vec();
    let mut n_shifts = 0usize;
    let mut checked = 0usize;
    while shifts {
        let outcome = best_shift(&current, reference, &ed, &mut checked);
        if checked >= MAX_SHIFT_CANDIDATES {
            break;
        }
        match outcome {
            Some(o) if o.delta > 0 => {
                n_shifts += 1;
                current = o.words;
            }
            _ => break,
        }
    }
    n_shifts + ed.compute(&current).0 as usize
}

fn prepare(text: &str, cfg: &TerConfig) -> String {
    tercom_tokenize(rstrip(text), cfg.case_sensitive, cfg.normalized)
}

/// (edits, reference length) of one segment.
pub fn segment_stats(hyp: &str, reference: &str, cfg: &TerConfig) -> (usize, usize) {
    let h = prepare(hyp, cfg);
    let r = prepare(reference, cfg);
    let hw: Vec<&str> = words(&h).collect();
    let rw: Vec<&str> = words(&r).collect();
    (edits(&hw, &rw, cfg.shifts), rw.len())
}

pub fn sentence_ter(hyp: &str, reference: &str, cfg: &TerConfig) -> Result<f64> {
    let (e, n) = segment_stats(hyp, reference, cfg);
    if n == 0 {
        return Err(Error::Invalid("TER reference segment is empty".into()));
    }
    Ok(100.0 * e as f64 / n as f64)
}

/// Corpus TER: total edits over total reference words, ×100.
pub fn ter(hyps: &[String], refs: &[String], cfg: &TerConfig) -> Result<EvalReport> {
    check_inputs(hyps, refs)?;
    let (mut total_edits, mut total_len) = (0usize, 0usize);
    for (i, (h, r)) in hyps.iter().zip(refs).enumerate() {
        let (e, n) = segment_stats(h, r, cfg);
        if n == 0 {
            return Err(Error::Invalid(format!("TER reference segment {} is empty", i + 1)));
        }
        total_edits += e;
        total_len += n;
    }
    Ok(EvalReport::new(
        "TER",
        100.0 * total_edits as f64 / total_len as f64,
        cfg.signature(),
        serde_json::json!({ "edits": total_edits, "ref_len": total_len }),
    ))
}
