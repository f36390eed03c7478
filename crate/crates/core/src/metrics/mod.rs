//! Corpus-level MT metrics with reproducibility signatures.
//!
//! Scores follow the community reference scorer: BLEU with mteval-13a
//! tokenization and exponential smoothing, chrF++ (six character orders, two
//! word orders, β = 2) and TER with tercom shifts. spBLEU is BLEU over the
//! pieces of a [`SubwordModel`](crate::subword::SubwordModel).
//!
//! ```
//! use domainsmith::metrics::{bleu, Smoothing, Tokenize};
//! let hyp = vec!["the cat sat on the mat".to_string()];
//! let report = bleu(&hyp, &hyp, Tokenize::ThirteenA, Smoothing::Exponential).unwrap();
//! assert_eq!(report.score.round(), 100.0);
//! ```

mod bleu;
mod chrf;
mod ter;
mod tokenize;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bleu::{bleu, score_from_stats, segment_stats as bleu_segment_stats, spbleu, BleuStats, Smoothing};
pub use chrf::{chrfpp, f_score as chrf_f_score, segment_stats as chrf_segment_stats, sentence_chrfpp, ChrfStats};
pub use ter::{edits as ter_edits, sentence_ter, ter, TerConfig};
pub use tokenize::{tercom_normalize, tokenize_13a, Tokenize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub score: f64,
    pub signature: String,
    /// Metric internals: n-gram matches, edit counts and the like.
    pub counts: serde_json::Value,
    /// Scores computed elsewhere (a COMET slot, say) attached for reporting.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub external_scores: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn new(metric: impl Into<String>, score: f64, signature: String, counts: serde_json::Value) -> Self {
        Self {
            metric: metric.into(),
            score,
            signature,
            counts,
            external_scores: BTreeMap::new(),
        }
    }

    pub fn with_external(mut self, name: impl Into<String>, score: f64) -> Self {
        self.external_scores.insert(name.into(), score);
        self
    }

    /// `METRIC|signature = score`, the usual one-line reporting form.
    pub fn summary_line(&self) -> String {
        format!("{}|{} = {:.2}", self.metric, self.signature, self.score)
    }
}

/// Metric selector used by the CLI and pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Bleu,
    Spbleu,
    Chrfpp,
    Ter,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bleu" => Ok(Metric::Bleu),
            "spbleu" => Ok(Metric::Spbleu),
            "chrfpp" => Ok(Metric::Chrfpp),
            "ter" => Ok(Metric::Ter),
            other => Err(Error::Usage(format!(
                "unknown metric {other:?} (expected bleu, spbleu, chrfpp or ter)"
            ))),
        }
    }
}

pub(crate) fn check_inputs(hyps: &[String], refs: &[String]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::Size {
            what: "hypotheses must match references one-to-one".into(),
            required: refs.len(),
            actual: hyps.len(),
        });
    }
    if hyps.is_empty() {
        return Err(Error::Invalid("cannot score an empty corpus".into()));
    }
    Ok(())
}
