//! Applying a trained unigram subword model.
//!
//! Models arrive as `piece<TAB>log-probability` TSV. Segmentation is Viterbi
//! over the lattice of vocabulary matches on the pre-processed text: a `▁`
//! boundary marker is prefixed and replaces every space, and with digit
//! splitting no piece may span more than one character when a digit is
//! involved. Characters with no matching piece fall back to their UTF-8 bytes
//! (`<0xNN>` pieces) when the model carries all 256 of them.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::LineReader;
use crate::error::{Error, Result};

pub const DEFAULT_PREFIX: char = '\u{2581}';

/// Control symbols that never match input text.
const CONTROL_PIECES: [&str; 4] = ["<unk>", "<s>", "</s>", "<pad>"];

/// Ordering used for exported vocabularies' reserved block.
pub const DEFAULT_RESERVED: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub vocab_size: usize,
    pub has_byte_fallback: bool,
    pub split_digits: bool,
    pub piece_prefix: char,
}

#[derive(Debug, Clone)]
pub struct SubwordModel {
    /// Pieces in file order.
    pieces: Vec<(String, f64)>,
    index: HashMap<String, f64>,
    /// Longest matchable piece, in characters.
    max_piece_chars: usize,
    byte_scores: Option<Box<[f64; 256]>>,
    meta: ModelMeta,
    checksum: String,
}

fn byte_piece(b: u8) -> String {
    format!("<0x{b:02X}>")
}

fn parse_byte_piece(piece: &str) -> Option<u8> {
    let hex = piece.strip_prefix("<0x")?.strip_suffix('>')?;
    if hex.len() != 2 {
        return None;
    }
    u8::from_str_radix(hex, 16).ok()
}

impl SubwordModel {
    /// Builds a model from `(piece, log-probability)` rows.
    pub fn from_pieces(rows: Vec<(String, f64)>, split_digits: bool) -> Result<Self> {
        let mut index = HashMap::with_capacity(rows.len());
        let mut hasher = Sha256::new();
        for (i, (piece, score)) in rows.iter().enumerate() {
            if piece.is_empty() {
                return Err(Error::Parse {
                    location: format!("row {}", i + 1),
                    message: "empty piece".into(),
                });
            }
            if !score.is_finite() || *score > 0.0 {
                return Err(Error::Parse {
                    location: format!("row {}", i + 1),
                    message: format!("log-probability must be finite and <= 0, got {score}"),
                });
            }
            if index.insert(piece.clone(), *score).is_some() {
                return Err(Error::Parse {
                    location: format!("row {}", i + 1),
                    message: format!("duplicate piece {piece:?}"),
                });
            }
            hasher.update(piece.as_bytes());
            hasher.update(b"\t");
            hasher.update(score.to_bits().to_le_bytes());
            hasher.update(b"\n");
        }
        let mut bytes = [0.0f64; 256];
        let mut byte_count = 0;
        for (piece, &score) in &index {
            if let Some(b) = parse_byte_piece(piece) {
                bytes[b as usize] = score;
                byte_count += 1;
            }
        }
        let has_byte_fallback = byte_count == 256;
        let max_piece_chars = index
            .keys()
            .filter(|p| parse_byte_piece(p).is_none() && !CONTROL_PIECES.contains(&p.as_str()))
            .map(|p| p.chars().count())
            .max()
            .unwrap_or(0);
        Ok(Self {
            meta: ModelMeta {
                vocab_size: rows.len(),
                has_byte_fallback,
                split_digits,
                piece_prefix: DEFAULT_PREFIX,
            },
            pieces: rows,
            index,
            max_piece_chars,
            byte_scores: has_byte_fallback.then(|| Box::new(bytes)),
            checksum: format!("sha256:{}", hex::encode(hasher.finalize())),
        })
    }

    /// Loads a two-column TSV (`piece<TAB>log-probability`). Digit splitting is on.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with(path, true)
    }

    pub fn load_with(path: &Path, split_digits: bool) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in LineReader::open(path)?.enumerate() {
            let line = line?;
            let location = || format!("{}:{}", path.display(), i + 1);
            let (piece, score) = line.split_once('\t').ok_or_else(|| Error::Parse {
                location: location(),
                message: "expected piece<TAB>log-probability".into(),
            })?;
            let score: f64 = score.trim().parse().map_err(|_| Error::Parse {
                location: location(),
                message: format!("score {score:?} is not a number"),
            })?;
            rows.push((piece.to_owned(), score));
        }
        Self::from_pieces(rows, split_digits).map_err(|e| match e {
            Error::Parse { location, message } => Error::Parse {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn pieces(&self) -> &[(String, f64)] {
        &self.pieces
    }

    pub fn score(&self, piece: &str) -> Option<f64> {
        self.index.get(piece).copied()
    }

    /// Digest of the model's rows, recorded in spBLEU signatures.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    fn normalize(&self, text: &str) -> Vec<char> {
        if text.is_empty() {
            return Vec::new();
        }
        let marker = self.meta.piece_prefix;
        std::iter::once(marker)
            .chain(text.chars().map(|c| if c == ' ' { marker } else { c }))
            .collect()
    }

    fn matchable(&self, piece: &str) -> Option<f64> {
        if CONTROL_PIECES.contains(&piece) || parse_byte_piece(piece).is_some() {
            return None;
        }
        self.score(piece)
    }

    /// Outgoing lattice edges at `start`: (end, score, pieces emitted).
    fn edges(&self, chars: &[char], start: usize) -> Vec<Edge> {
        let mut edges = Vec::new();
        let limit = (chars.len() - start).min(self.max_piece_chars);
        let mut piece = String::new();
        for len in 1..=limit {
            let c = chars[start + len - 1];
            if self.meta.split_digits && len > 1 && (c.is_ascii_digit() || chars[start].is_ascii_digit()) {
                break;
            }
            piece.push(c);
            if let Some(score) = self.matchable(&piece) {
                edges.push(Edge {
                    end: start + len,
                    score,
                    pieces: 1,
                });
            }
        }
        if edges.is_empty() {
            // Without byte pieces this position is simply unreachable.
            let Some(scores) = self.byte_scores.as_ref() else {
                return edges;
            };
            let ch = chars[start];
            let mut buf = [0u8; 4];
            let bytes = ch.encode_utf8(&mut buf).as_bytes();
            edges.push(Edge {
                end: start + 1,
                score: bytes.iter().map(|&b| scores[b as usize]).sum(),
                pieces: bytes.len(),
            });
        }
        edges
    }

    fn emit(&self, chars: &[char], start: usize, edge: &Edge, out: &mut Vec<String>) {
        let text: String = chars[start..edge.end].iter().collect();
        if self.matchable(&text).is_some() && edge.pieces == 1 {
            out.push(text);
        } else {
            out.extend(text.bytes().map(byte_piece));
        }
    }

    /// Best segmentation by total log-probability; ties prefer fewer pieces,
    /// then the longest leftmost piece.
    pub fn segment(&self, text: &str) -> Result<Vec<String>> {
        Ok(self.segment_scored(text)?.0)
    }

    /// Segmentation together with its total log-probability.
    pub fn segment_scored(&self, text: &str) -> Result<(Vec<String>, f64)> {
        let chars = self.normalize(text);
        let n = chars.len();
        // best[i]: optimal segmentation of chars[i..], computed right to left
        let mut best: Vec<Option<(f64, usize, Edge)>> = vec![None; n + 1];
        let mut total = vec![(0.0f64, 0usize); n + 1];
        for start in (0..n).rev() {
            for edge in self.edges(&chars, start) {
                if edge.end < n && best[edge.end].is_none() {
                    continue;
                }
                let (rest_score, rest_count) = total[edge.end];
                let cand = (edge.score + rest_score, edge.pieces + rest_count);
                let better = match &best[start] {
                    None => true,
                    Some((score, count, cur)) => {
                        if cand.0 > score + TIE_EPS {
                            true
                        } else if cand.0 < score - TIE_EPS {
                            false
                        } else if cand.1 != *count {
                            cand.1 < *count
                        } else {
                            edge.end > cur.end
                        }
                    }
                };
                if better {
                    total[start] = cand;
                    best[start] = Some((cand.0, cand.1, edge));
                }
            }
        }
        if n > 0 && best[0].is_none() {
            let ch = chars
                .iter()
                .copied()
                .find(|c| self.matchable(&c.to_string()).is_none())
                .unwrap_or(chars[0]);
            return Err(Error::Coverage { ch });
        }
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < n {
            let (_, _, edge) = best[pos].clone().expect("reachable positions lead to the end");
            self.emit(&chars, pos, &edge, &mut out);
            pos = edge.end;
        }
        Ok((out, total[0].0))
    }

    /// Sum of stored log-probabilities of `pieces`.
    pub fn score_pieces(&self, pieces: &[String]) -> Option<f64> {
        pieces.iter().map(|p| self.score(p)).sum()
    }
}

#[derive(Debug, Clone)]
struct Edge {
    end: usize,
    score: f64,
    pieces: usize,
}

/// Inverse of segmentation: joins pieces, decodes byte runs and turns boundary
/// markers back into spaces, dropping the single leading one.
pub fn desegment(pieces: &[String]) -> Result<String> {
    desegment_with(pieces, DEFAULT_PREFIX)
}

pub fn desegment_with(pieces: &[String], marker: char) -> Result<String> {
    let mut out = String::new();
    let mut pending: Vec<u8> = Vec::new();
    let flush = |pending: &mut Vec<u8>, out: &mut String| -> Result<()> {
        if pending.is_empty() {
            return Ok(());
        }
        let text = String::from_utf8(std::mem::take(pending))
            .map_err(|e| Error::ByteDecode(format!("{:02X?} is not UTF-8", e.as_bytes())))?;
        out.push_str(&text);
        Ok(())
    };
    for piece in pieces {
        match parse_byte_piece(piece) {
            Some(b) => pending.push(b),
            None => {
                flush(&mut pending, &mut out)?;
                out.push_str(piece);
            }
        }
    }
    flush(&mut pending, &mut out)?;
    let text: String = out.chars().map(|c| if c == marker { ' ' } else { c }).collect();
    Ok(text.strip_prefix(' ').map(str::to_owned).unwrap_or(text))
}

/// Writes the NMT vocabulary: reserved tokens first, then pieces by
/// descending log-probability with lexicographic tie-break.
///
/// Reserved tokens that collide with model pieces are an error unless
/// `dedup` is set, in which case the colliding pieces are skipped.
pub fn export_vocab(model: &SubwordModel, reserved: &[&str], dedup: bool, path: &Path) -> Result<usize> {
    let lines = vocab_lines(model, reserved, dedup)?;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for line in &lines {
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(lines.len())
}

pub fn vocab_lines(model: &SubwordModel, reserved: &[&str], dedup: bool) -> Result<Vec<String>> {
    let mut seen = std::collections::HashSet::new();
    for r in reserved {
        if !seen.insert(*r) {
            return Err(Error::Invalid(format!("reserved token {r:?} listed twice")));
        }
        if !dedup && model.score(r).is_some() {
            return Err(Error::Invalid(format!(
                "reserved token {r:?} is also a model piece"
            )));
        }
    }
    let mut pieces: Vec<&(String, f64)> = model
        .pieces()
        .iter()
        .filter(|(p, _)| !seen.contains(p.as_str()))
        .collect();
    pieces.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(reserved
        .iter()
        .map(|s| s.to_string())
        .chain(pieces.into_iter().map(|(p, _)| p.clone()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(rows: &[(&str, f64)]) -> SubwordModel {
        SubwordModel::from_pieces(rows.iter().map(|(p, s)| (p.to_string(), *s)).collect(), true).unwrap()
    }

    fn with_bytes(rows: &[(&str, f64)]) -> SubwordModel {
        let mut all: Vec<(String, f64)> = rows.iter().map(|(p, s)| (p.to_string(), *s)).collect();
        all.extend((0..=255u8).map(|b| (byte_piece(b), -10.0)));
        SubwordModel::from_pieces(all, true).unwrap()
    }

    #[test]
    fn single_piece_wins_over_splits() {
        let m = model(&[("▁hello", -1.0), ("▁he", -2.0), ("llo", -2.0), ("▁", -3.0), ("h", -5.0)]);
        assert_eq!(m.segment("hello").unwrap(), vec!["▁hello"]);
    }

    #[test]
    fn digits_split_individually() {
        let m = model(&[("▁", -1.0), ("2", -2.0), ("0", -2.0), ("3", -2.0), ("20", -0.5), ("▁2", -0.1), ("2023", -0.1)]);
        let pieces = m.segment("2023").unwrap();
        assert_eq!(pieces, vec!["▁", "2", "0", "2", "3"]);
        let digits: Vec<&String> = pieces.iter().filter(|p| p.chars().any(|c| c.is_ascii_digit())).collect();
        assert_eq!(digits.len(), 4);
        assert!(digits.iter().all(|p| p.chars().count() == 1));
    }

    #[test]
    fn byte_fallback_for_unknown_characters() {
        let m = with_bytes(&[("▁", -1.0), ("a", -1.0)]);
        let pieces = m.segment("aم").unwrap();
        assert_eq!(pieces, vec!["▁", "a", "<0xD9>", "<0x85>"]);
        assert_eq!(desegment(&pieces).unwrap(), "aم");
    }

    #[test]
    fn no_fallback_is_a_coverage_error() {
        let m = model(&[("▁", -1.0), ("a", -1.0)]);
        match m.segment("ab") {
            Err(Error::Coverage { ch: 'b' }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn desegment_examples() {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(desegment(&v(&["▁he", "llo"])).unwrap(), "hello");
        assert_eq!(desegment(&v(&["<0xD9>", "<0x85>"])).unwrap(), "م");
        assert_eq!(desegment(&v(&["▁a", "▁b"])).unwrap(), "a b");
        assert!(matches!(desegment(&v(&["<0xD9>"])), Err(Error::ByteDecode(_))));
    }

    #[test]
    fn ties_prefer_fewer_pieces_then_longest_left() {
        // "▁ab" as one piece (-2) versus "▁a"+"b" (-1 + -1): equal score, fewer pieces wins
        let m = model(&[("▁ab", -2.0), ("▁a", -1.0), ("b", -1.0), ("▁", -5.0), ("a", -5.0)]);
        assert_eq!(m.segment("ab").unwrap(), vec!["▁ab"]);
        // "▁a"+"bc" and "▁ab"+"c": same score and count, leftmost-longest picks "▁ab"
        let m = model(&[("▁a", -1.0), ("bc", -1.0), ("▁ab", -1.0), ("c", -1.0), ("b", -9.0)]);
        assert_eq!(m.segment("abc").unwrap(), vec!["▁ab", "c"]);
    }

    #[test]
    fn load_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.tsv");
        std::fs::write(&p, "▁the\t-3.2\na\t-1\nb\t-1\n").unwrap();
        let m = SubwordModel::load(&p).unwrap();
        assert_eq!(m.meta().vocab_size, 3);
        assert_eq!(m.score("▁the"), Some(-3.2));
        std::fs::write(&p, "a\t-1\nb\tx\n").unwrap();
        let err = SubwordModel::load(&p).unwrap_err().to_string();
        assert!(err.contains(":2"), "{err}");
        std::fs::write(&p, "a\t-1\na\t-2\n").unwrap();
        assert!(SubwordModel::load(&p).is_err());
        std::fs::write(&p, "a\t0.5\n").unwrap();
        assert!(SubwordModel::load(&p).is_err());
    }

    #[test]
    fn vocab_order_and_reserved() {
        let m = model(&[("b", -1.0), ("a", -1.0), ("c", -0.5)]);
        let lines = vocab_lines(&m, &["<pad>", "<s>", "</s>"], false).unwrap();
        assert_eq!(lines, vec!["<pad>", "<s>", "</s>", "c", "a", "b"]);
        assert_eq!(vocab_lines(&m, &[], false).unwrap(), vec!["c", "a", "b"]);
        let m = model(&[("<s>", 0.0), ("a", -1.0)]);
        assert!(vocab_lines(&m, &["<s>"], false).is_err());
        assert_eq!(vocab_lines(&m, &["<s>"], true).unwrap(), vec!["<s>", "a"]);
    }

    #[test]
    fn empty_text_has_no_pieces() {
        let m = model(&[("▁", -1.0)]);
        assert!(m.segment("").unwrap().is_empty());
        assert_eq!(desegment(&[]).unwrap(), "");
    }
}
