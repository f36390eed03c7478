//! Rule-based and embedding-based bitext filtering with per-rule audit counts.
//!
//! Rules run in a fixed order and a pair is charged to the first rule that
//! rejects it: html_empty, duplicate, source_copy, too_long, ratio.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{concat, write_json, SegmentPair};
use crate::error::{Error, Result};
use crate::services::EmbedClient;

/// Reasons a segment can be rejected, across bitext and generated-text cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    HtmlEmpty,
    Duplicate,
    SourceCopy,
    TooLong,
    Ratio,
    BelowThreshold,
    DashOnly,
    Filename,
    WrongLanguage,
}

impl DropReason {
    pub const RULES: [DropReason; 5] = [
        DropReason::HtmlEmpty,
        DropReason::Duplicate,
        DropReason::SourceCopy,
        DropReason::TooLong,
        DropReason::Ratio,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectSample {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

/// Per-rule audit of one filtering pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub name: String,
    pub input_count: usize,
    pub kept_count: usize,
    pub dropped: BTreeMap<DropReason, usize>,
    pub samples: BTreeMap<DropReason, Vec<RejectSample>>,
    pub sample_limit: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl FilterReport {
    pub fn new(name: impl Into<String>, reasons: &[DropReason], sample_limit: usize) -> Self {
        Self {
            name: name.into(),
            input_count: 0,
            kept_count: 0,
            dropped: reasons.iter().map(|&r| (r, 0)).collect(),
            samples: BTreeMap::new(),
            sample_limit,
            embedder: None,
            threshold: None,
        }
    }

    pub fn record_kept(&mut self) {
        self.input_count += 1;
        self.kept_count += 1;
    }

    pub fn record_drop(&mut self, reason: DropReason, source: &str, target: Option<&str>) {
        self.input_count += 1;
        *self.dropped.entry(reason).or_insert(0) += 1;
        let samples = self.samples.entry(reason).or_default();
        if samples.len() < self.sample_limit {
            samples.push(RejectSample {
                source: source.to_owned(),
                target: target.map(str::to_owned),
            });
        }
    }

    pub fn dropped_total(&self) -> usize {
        self.dropped.values().sum()
    }

    pub fn dropped_for(&self, reason: DropReason) -> usize {
        self.dropped.get(&reason).copied().unwrap_or(0)
    }

    /// input_count = kept_count + Σ dropped.
    pub fn is_conserved(&self) -> bool {
        self.input_count == self.kept_count + self.dropped_total()
    }

    /// Report of two passes run back to back: the second pass' input must be
    /// the first pass' output.
    pub fn chain(&self, next: &FilterReport) -> Result<FilterReport> {
        if self.kept_count != next.input_count {
            return Err(Error::Invalid(format!(
                "cannot chain {:?} ({} kept) into {:?} ({} input)",
                self.name, self.kept_count, next.name, next.input_count
            )));
        }
        let mut out = self.clone();
        out.kept_count = next.kept_count;
        for (&r, &n) in &next.dropped {
            *out.dropped.entry(r).or_insert(0) += n;
        }
        for (&r, s) in &next.samples {
            out.samples.entry(r).or_default().extend(s.iter().cloned());
        }
        out.embedder = next.embedder.clone().or(out.embedder);
        out.threshold = next.threshold.or(out.threshold);
        Ok(out)
    }

    pub fn file_name(name: &str) -> String {
        format!("{name}.filter.json")
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(Self::file_name(&self.name));
        write_json(&path, self)?;
        Ok(path)
    }

    /// Sidecar TSV of sampled rejects: `rule<TAB>source<TAB>target`.
    pub fn write_rejects_tsv(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for (reason, samples) in &self.samples {
            let rule = serde_json::to_value(reason)?;
            for s in samples {
                text.push_str(rule.as_str().unwrap_or_default());
                text.push('\t');
                text.push_str(&s.source.replace('\t', " "));
                text.push('\t');
                text.push_str(&s.target.as_deref().unwrap_or("").replace('\t', " "));
                text.push('\n');
            }
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioDirection {
    /// max(|src|, |tgt|) / min(|src|, |tgt|)
    #[default]
    Both,
    /// |src| / |tgt| only
    SourceOverTarget,
    /// |tgt| / |src| only
    TargetOverSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HtmlMode {
    /// Remove tag spans and keep the text.
    #[default]
    Strip,
    /// Reject any pair containing a tag span (counted under html_empty).
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    pub drop_duplicates: bool,
    pub drop_source_copies: bool,
    pub max_length_ratio: f64,
    pub ratio_direction: RatioDirection,
    pub max_words: usize,
    pub strip_html: bool,
    pub html_mode: HtmlMode,
    pub normalize_before_compare: bool,
    pub sample_limit: usize,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            drop_duplicates: true,
            drop_source_copies: true,
            max_length_ratio: 2.0,
            ratio_direction: RatioDirection::Both,
            max_words: 200,
            strip_html: true,
            html_mode: HtmlMode::Strip,
            normalize_before_compare: false,
            sample_limit: 5,
        }
    }
}

impl RuleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_length_ratio >= 1.0) {
            return Err(Error::Config(format!(
                "max_length_ratio must be >= 1.0, got {}",
                self.max_length_ratio
            )));
        }
        if self.max_words == 0 {
            return Err(Error::Config("max_words must be positive".into()));
        }
        Ok(())
    }
}

fn tag_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<[^<>]+>").unwrap())
}

/// Removes `<...>` spans until none remain, so the result is a fixed point.
pub fn strip_tags(text: &str) -> String {
    let re = tag_regex();
    let mut current = text.to_owned();
    while re.is_match(&current) {
        current = re.replace_all(&current, "").into_owned();
    }
    current
}

fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Stateful rule filter; the duplicate set grows across calls.
pub struct RuleFilter {
    cfg: RuleConfig,
    seen: HashSet<(String, String)>,
    report: FilterReport,
}

impl RuleFilter {
    pub fn new(name: &str, cfg: RuleConfig) -> Result<Self> {
        cfg.validate()?;
        let report = FilterReport::new(name, &DropReason::RULES, cfg.sample_limit);
        Ok(Self {
            cfg,
            seen: HashSet::new(),
            report,
        })
    }

    fn key(&self, text: &str) -> String {
        let trimmed = text.trim();
        if self.cfg.normalize_before_compare {
            trimmed.nfc().collect()
        } else {
            trimmed.to_owned()
        }
    }

    fn reject(&mut self, reason: DropReason, pair: &SegmentPair) -> Option<SegmentPair> {
        self.report
            .record_drop(reason, &pair.source, Some(&pair.target));
        None
    }

    /// Returns the (possibly tag-stripped) pair if every rule accepts it.
    pub fn check(&mut self, mut pair: SegmentPair) -> Option<SegmentPair> {
        if self.cfg.strip_html {
            let has_tag = tag_regex().is_match(&pair.source) || tag_regex().is_match(&pair.target);
            if has_tag {
                if self.cfg.html_mode == HtmlMode::Drop {
                    return self.reject(DropReason::HtmlEmpty, &pair);
                }
                let original = pair.clone();
                pair.source = strip_tags(&pair.source);
                pair.target = strip_tags(&pair.target);
                if pair.source.trim().is_empty() || pair.target.trim().is_empty() {
                    return self.reject(DropReason::HtmlEmpty, &original);
                }
            }
        }
        if pair.source.trim().is_empty() || pair.target.trim().is_empty() {
            return self.reject(DropReason::HtmlEmpty, &pair);
        }

        let key = (self.key(&pair.source), self.key(&pair.target));
        if self.cfg.drop_duplicates && self.seen.contains(&key) {
            return self.reject(DropReason::Duplicate, &pair);
        }
        if self.cfg.drop_source_copies && pair.source.trim() == pair.target.trim() {
            return self.reject(DropReason::SourceCopy, &pair);
        }
        let (ns, nt) = (word_count(&pair.source), word_count(&pair.target));
        if ns > self.cfg.max_words || nt > self.cfg.max_words {
            return self.reject(DropReason::TooLong, &pair);
        }
        let ratio = match self.cfg.ratio_direction {
            RatioDirection::Both => ns.max(nt) as f64 / ns.min(nt) as f64,
            RatioDirection::SourceOverTarget => ns as f64 / nt as f64,
            RatioDirection::TargetOverSource => nt as f64 / ns as f64,
        };
        if ratio > self.cfg.max_length_ratio {
            return self.reject(DropReason::Ratio, &pair);
        }

        if self.cfg.drop_duplicates {
            self.seen.insert(key);
        }
        self.report.record_kept();
        Some(pair)
    }

    pub fn report(&self) -> &FilterReport {
        &self.report
    }

    pub fn into_report(self) -> FilterReport {
        self.report
    }
}

/// Runs the rule filter over a stream, preserving input order.
pub fn apply_rules<I>(name: &str, pairs: I, cfg: &RuleConfig) -> Result<(Vec<SegmentPair>, FilterReport)>
where
    I: IntoIterator<Item = SegmentPair>,
{
    let mut filter = RuleFilter::new(name, cfg.clone())?;
    let kept = pairs.into_iter().filter_map(|p| filter.check(p)).collect();
    Ok((kept, filter.into_report()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemanticConfig {
    pub threshold: f64,
    pub batch_size: usize,
    pub log_similarities: bool,
    pub sample_limit: usize,
}

impl Default for SemanticConfig {
    fn default() -> Self {
        Self {
            threshold: 0.45,
            batch_size: 64,
            log_similarities: false,
            sample_limit: 5,
        }
    }
}

impl SemanticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "similarity threshold must lie in [-1, 1], got {}",
                self.threshold
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Cosine similarity; zero vectors have similarity 0 with everything.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

#[derive(Debug, Clone)]
pub struct SemanticOutcome {
    pub kept: Vec<SegmentPair>,
    pub report: FilterReport,
    /// Similarity of every input pair, in input order, when logging is enabled.
    pub similarities: Option<Vec<f64>>,
}

/// Keeps pairs with cosine(embed(source), embed(target)) >= threshold.
pub fn semantic_filter<I>(
    name: &str,
    pairs: I,
    cfg: &SemanticConfig,
    embedder: &EmbedClient,
) -> Result<SemanticOutcome>
where
    I: IntoIterator<Item = SegmentPair>,
{
    cfg.validate()?;
    let pairs: Vec<SegmentPair> = pairs.into_iter().collect();
    let mut report = FilterReport::new(name, &[DropReason::BelowThreshold], cfg.sample_limit);
    report.embedder = Some(embedder.model_id());
    report.threshold = Some(cfg.threshold);

    let batches: Vec<&[SegmentPair]> = pairs.chunks(cfg.batch_size).collect();
    let sims_per_batch = crate::services::fan_out(batches.len(), embedder.max_in_flight(), |b| {
        let batch = batches[b];
        let sources: Vec<String> = batch.iter().map(|p| p.source.clone()).collect();
        let targets: Vec<String> = batch.iter().map(|p| p.target.clone()).collect();
        let es = embedder.embed(&sources)?;
        let et = embedder.embed(&targets)?;
        if es.dim != et.dim {
            return Err(Error::Protocol {
                route: "/v1/embed".into(),
                message: format!(
                    "source embeddings have dimension {} but target embeddings have {}",
                    es.dim, et.dim
                ),
            });
        }
        Ok(es
            .vectors
            .iter()
            .zip(&et.vectors)
            .map(|(a, b)| cosine(a, b))
            .collect::<Vec<f64>>())
    })?;
    let sims: Vec<f64> = sims_per_batch.into_iter().flatten().collect();

    let mut kept = Vec::new();
    for (pair, &sim) in pairs.into_iter().zip(&sims) {
        if sim >= cfg.threshold {
            report.record_kept();
            kept.push(pair);
        } else {
            report.record_drop(DropReason::BelowThreshold, &pair.source, Some(&pair.target));
        }
    }
    Ok(SemanticOutcome {
        kept,
        report,
        similarities: cfg.log_similarities.then_some(sims),
    })
}

/// Rules over the concatenation of all corpora (deduplicating across them),
/// then the optional semantic pass.
pub fn global_filter<I>(
    name: &str,
    corpora: Vec<I>,
    rules: &RuleConfig,
    semantic: Option<(&SemanticConfig, &EmbedClient)>,
) -> Result<(Vec<SegmentPair>, FilterReport)>
where
    I: Iterator<Item = SegmentPair>,
{
    let (kept, report) = apply_rules(name, concat(corpora), rules)?;
    match semantic {
        None => Ok((kept, report)),
        Some((cfg, embedder)) => {
            let out = semantic_filter(name, kept, cfg, embedder)?;
            Ok((out.kept, report.chain(&out.report)?))
        }
    }
}
