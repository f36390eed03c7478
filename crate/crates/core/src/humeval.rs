//! Blind human rating of translation outputs.
//!
//! A session shows each source sentence with the candidate translations of
//! every system under neutral labels (`A`, `B`, ...), in an order shuffled per
//! item. The rater types a 1-4 score for each candidate. Every answer is
//! appended to a JSON-lines ratings file right away, so an interrupted session
//! picks up where it stopped. System identities only come back in
//! [`aggregate`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{append_lines, recover_journal};
use crate::corpus::SegmentPair;
use crate::error::{Error, Result};
use crate::rng::{mix64, SeededRng};

pub const DEFAULT_EVAL_SIZE: usize = 50;

/// The four-point adequacy scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum RatingScale {
    Unacceptable = 1,
    PossiblyAcceptable = 2,
    Acceptable = 3,
    Ideal = 4,
}

impl RatingScale {
    pub const ALL: [RatingScale; 4] = [
        RatingScale::Unacceptable,
        RatingScale::PossiblyAcceptable,
        RatingScale::Acceptable,
        RatingScale::Ideal,
    ];

    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn label(self) -> &'static str {
        match self {
            RatingScale::Unacceptable => "Unacceptable",
            RatingScale::PossiblyAcceptable => "Possibly Acceptable",
            RatingScale::Acceptable => "Acceptable",
            RatingScale::Ideal => "Ideal",
        }
    }
}

impl TryFrom<u8> for RatingScale {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        RatingScale::ALL
            .get((v as usize).wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::Invalid(format!("rating {v} is outside 1..4")))
    }
}

impl From<RatingScale> for u8 {
    fn from(r: RatingScale) -> u8 {
        r.value()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub item_id: usize,
    pub system_id: String,
    pub rating: RatingScale,
    pub rater_id: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    /// Index of the segment in the test corpus.
    pub item_id: usize,
    pub source: String,
    pub reference: String,
}

/// Uniform seeded sample of `n` test segments, in draw order.
pub fn sample_eval_set(test: &[SegmentPair], n: usize, seed: u64) -> Result<Vec<EvalItem>> {
    if test.len() < n {
        return Err(Error::Size {
            what: "evaluation sample larger than the test set".into(),
            required: n,
            actual: test.len(),
        });
    }
    let picks = SeededRng::new(seed).sample_indices(test.len(), n);
    Ok(picks
        .into_iter()
        .map(|i| EvalItem {
            item_id: i,
            source: test[i].source.clone(),
            reference: test[i].target.clone(),
        })
        .collect())
}

/// Label shown for the `pos`-th candidate: A..Z, then AA, AB, ...
pub fn candidate_label(pos: usize) -> String {
    let mut n = pos;
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (n % 26) as u8);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

/// Order in which the systems are presented for one item.
pub fn presentation_order(systems: &[String], seed: u64, item_id: usize) -> Vec<String> {
    let mut order: Vec<String> = systems.to_vec();
    order.sort();
    SeededRng::new(mix64(seed, item_id as u64)).shuffle(&mut order);
    order
}

pub struct SessionConfig {
    pub rater_id: String,
    pub seed: u64,
    pub ratings_path: PathBuf,
    /// Source of record timestamps; swap in a fixed clock for tests.
    pub clock: Box<dyn FnMut() -> u64>,
}

impl SessionConfig {
    pub fn new(rater_id: impl Into<String>, seed: u64, ratings_path: impl Into<PathBuf>) -> Self {
        Self {
            rater_id: rater_id.into(),
            seed,
            ratings_path: ratings_path.into(),
            clock: Box::new(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs())
            }),
        }
    }

    pub fn with_clock(mut self, clock: impl FnMut() -> u64 + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionOutcome {
    /// Every record in the ratings file for this rater, old and new.
    pub records: Vec<RatingRecord>,
    /// False when the input ended before all items were rated.
    pub completed: bool,
    pub items_remaining: usize,
}

/// Loads a ratings file, dropping a torn final line.
pub fn load_records(path: &Path) -> Result<Vec<RatingRecord>> {
    recover_journal(path)?
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                location: format!("{}:{}", path.display(), n + 1),
                message: e.to_string(),
            })
        })
        .collect()
}

fn write_io<W: Write>(out: &mut W, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<session output>", e))
}

/// Reads one rating, re-prompting on anything but 1-4. `None` on end of input.
fn ask<R: BufRead, W: Write>(input: &mut R, out: &mut W, label: &str) -> Result<Option<RatingScale>> {
    loop {
        write_io(out, &format!("Rating for {label} [1-4]: "))?;
        let mut line = String::new();
        let n = input.read_line(&mut line).map_err(|e| Error::io("<session input>", e))?;
        if n == 0 {
            return Ok(None);
        }
        let answer = line.trim();
        if let Some(r) = answer.parse::<u8>().ok().and_then(|v| RatingScale::try_from(v).ok()) {
            return Ok(Some(r));
        }
        write_io(out, "Please enter 1, 2, 3 or 4.\n")?;
    }
}

/// Runs an interactive rating session over `items`.
///
/// `system_outputs[sys][item_id]` is the translation of test segment
/// `item_id` by system `sys`.
pub fn run_session<R: BufRead, W: Write>(
    items: &[EvalItem],
    system_outputs: &BTreeMap<String, Vec<String>>,
    cfg: &mut SessionConfig,
    input: &mut R,
    out: &mut W,
) -> Result<SessionOutcome> {
    if system_outputs.is_empty() {
        return Err(Error::Invalid("no system outputs to rate".into()));
    }
    for (sys, outputs) in system_outputs {
        if let Some(item) = items.iter().find(|it| it.item_id >= outputs.len()) {
            return Err(Error::Invalid(format!(
                "system {sys} has no output for item {} ({} outputs)",
                item.item_id,
                outputs.len()
            )));
        }
    }
    let systems: Vec<String> = system_outputs.keys().cloned().collect();

    let mut records: Vec<RatingRecord> = load_records(&cfg.ratings_path)?
        .into_iter()
        .filter(|r| r.rater_id == cfg.rater_id)
        .collect();
    let mut done: HashSet<(usize, String)> = records.iter().map(|r| (r.item_id, r.system_id.clone())).collect();
    let pending = |done: &HashSet<(usize, String)>| {
        items
            .iter()
            .filter(|it| systems.iter().any(|s| !done.contains(&(it.item_id, s.clone()))))
            .count()
    };
    let already = items.len() - pending(&done);
    if already > 0 {
        write_io(out, &format!("Resuming: {already} of {} items already rated.\n", items.len()))?;
    }

    let scale: Vec<String> = RatingScale::ALL.iter().map(|r| format!("{} = {}", r.value(), r.label())).collect();
    write_io(out, &format!("Scale: {}\n", scale.join(", ")))?;

    for (pos, item) in items.iter().enumerate() {
        let order = presentation_order(&systems, cfg.seed, item.item_id);
        if order.iter().all(|s| done.contains(&(item.item_id, s.clone()))) {
            continue;
        }
        let mut screen = format!("\nItem {}/{}\nSource: {}\n", pos + 1, items.len(), item.source);
        for (i, sys) in order.iter().enumerate() {
            screen.push_str(&format!("  {}: {}\n", candidate_label(i), system_outputs[sys][item.item_id]));
        }
        write_io(out, &screen)?;

        for (i, sys) in order.iter().enumerate() {
            if done.contains(&(item.item_id, sys.clone())) {
                continue;
            }
            let Some(rating) = ask(input, out, &candidate_label(i))? else {
                write_io(out, "\nSession interrupted; ratings so far are saved.\n")?;
                let items_remaining = pending(&done);
                return Ok(SessionOutcome {
                    records,
                    completed: false,
                    items_remaining,
                });
            };
            let rec = RatingRecord {
                item_id: item.item_id,
                system_id: sys.clone(),
                rating,
                rater_id: cfg.rater_id.clone(),
                timestamp: (cfg.clock)(),
            };
            append_lines(&cfg.ratings_path, &[serde_json::to_string(&rec)?])?;
            done.insert((item.item_id, sys.clone()));
            records.push(rec);
        }
    }
    write_io(out, "\nAll items rated.\n")?;
    Ok(SessionOutcome {
        records,
        completed: true,
        items_remaining: 0,
    })
}

/// Percentage form of a mean rating: `mean / 4 * 100`, unrounded.
pub fn percentage_of(mean: f64) -> f64 {
    mean * 25.0
}

/// Rounds to one decimal, the precision scores are reported at.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub mean: f64,
    /// `25 * mean`, rounded to one decimal.
    pub percentage: f64,
    pub count: usize,
    pub raters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub systems: BTreeMap<String, SystemScore>,
}

impl AggregateReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::corpus::write_json(path, self)
    }
}

/// Per-system mean and percentage. With several raters the mean is the mean
/// of the per-rater means.
pub fn aggregate(records: &[RatingRecord]) -> Result<AggregateReport> {
    let mut seen = BTreeSet::new();
    // system -> rater -> (sum, n)
    let mut acc: BTreeMap<&str, BTreeMap<&str, (u64, usize)>> = BTreeMap::new();
    for r in records {
        if !seen.insert((r.item_id, r.system_id.as_str(), r.rater_id.as_str())) {
            return Err(Error::Invalid(format!(
                "item {} rated twice for system {} by rater {}",
                r.item_id, r.system_id, r.rater_id
            )));
        }
        let slot = acc.entry(&r.system_id).or_default().entry(&r.rater_id).or_default();
        slot.0 += r.rating.value() as u64;
        slot.1 += 1;
    }
    let systems = acc
        .into_iter()
        .map(|(sys, raters)| {
            let means: Vec<f64> = raters.values().map(|&(s, n)| s as f64 / n as f64).collect();
            let mean = means.iter().sum::<f64>() / means.len() as f64;
            let score = SystemScore {
                mean,
                percentage: round1(percentage_of(mean)),
                count: raters.values().map(|v| v.1).sum(),
                raters: raters.len(),
            };
            (sys.to_owned(), score)
        })
        .collect();
    Ok(AggregateReport { systems })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_and_scale() {
        assert_eq!(candidate_label(0), "A");
        assert_eq!(candidate_label(25), "Z");
        assert_eq!(candidate_label(26), "AA");
        assert!(RatingScale::try_from(0).is_err());
        assert!(RatingScale::try_from(5).is_err());
        assert_eq!(RatingScale::try_from(2).unwrap().label(), "Possibly Acceptable");
        let json = serde_json::to_string(&RatingScale::Ideal).unwrap();
        assert_eq!(json, "4");
    }

    #[test]
    fn all_fours() {
        let recs: Vec<RatingRecord> = (0..10)
            .map(|i| RatingRecord {
                item_id: i,
                system_id: "s".into(),
                rating: RatingScale::Ideal,
                rater_id: "r".into(),
                timestamp: 0,
            })
            .collect();
        let rep = aggregate(&recs).unwrap();
        assert_eq!(rep.systems["s"].mean, 4.0);
        assert_eq!(rep.systems["s"].percentage, 100.0);
        assert_eq!(rep.systems["s"].count, 10);
    }

    #[test]
    fn duplicate_rating_rejected() {
        let r = RatingRecord {
            item_id: 1,
            system_id: "s".into(),
            rating: RatingScale::Ideal,
            rater_id: "r".into(),
            timestamp: 0,
        };
        assert!(aggregate(&[r.clone(), r]).is_err());
    }
}
