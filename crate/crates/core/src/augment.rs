//! Synthetic in-domain data: prompt-based generation, sentence splitting,
//! cleanup of generated text and back-/forward-translation.
//!
//! Each prompt is sent once per run. The per-call seed is
//! `mix64(run_seed, prompt_index)` (splitmix64 of the run seed xored with the
//! golden-ratio-scaled index), so runs differ from each other while every
//! single call stays reproducible.
//!
//! Long jobs can journal their progress. Generation appends one JSON line per
//! call to a `.genl` file:
//!
//! ```json
//! {"run":0,"prompt_index":3,"seed":1234,"sequences":["...","..."]}
//! ```
//!
//! and translation appends one output line per input. Both are flushed every
//! `checkpoint_every` requests; a rerun pointed at the same journal skips
//! what is already there.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LanguagePair, MonoCorpus, Provenance, SegmentPair};
use crate::error::{Error, Result};
use crate::filters::{DropReason, FilterReport};
use crate::rng::mix64;
use crate::services::{fan_out, GenerationParams, LmClient, MtClient, TranslationParams};

pub const DEFAULT_CHECKPOINT_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentPlan {
    /// Target-language sentences used verbatim as prompts.
    pub prompts: Vec<String>,
    /// One seed per run.
    pub seeds: Vec<u64>,
    pub gen_params: GenerationParams,
    pub expected_lang: String,
    /// Keep the prompts themselves in the synthetic corpus.
    #[serde(default)]
    pub include_prompts: bool,
}

impl AugmentPlan {
    pub fn new(prompts: Vec<String>, seeds: Vec<u64>, gen_params: GenerationParams, expected_lang: impl Into<String>) -> Self {
        Self {
            prompts,
            seeds,
            gen_params,
            expected_lang: expected_lang.into(),
            include_prompts: false,
        }
    }

    pub fn runs(&self) -> usize {
        self.seeds.len()
    }

    /// Seed sent with prompt `prompt_index` in run `run`.
    pub fn call_seed(&self, run: usize, prompt_index: usize) -> u64 {
        mix64(self.seeds[run], prompt_index as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("an augmentation plan needs at least one run seed".into()));
        }
        self.gen_params.validate()
    }

    /// Number of raw texts a complete run returns.
    pub fn expected_outputs(&self) -> usize {
        self.prompts.len() * self.runs() * self.gen_params.num_return_sequences as usize
    }
}

/// One generation call as journaled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenRecord {
    pub run: usize,
    pub prompt_index: usize,
    pub seed: u64,
    pub sequences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JournalOptions {
    pub path: Option<PathBuf>,
    pub checkpoint_every: usize,
}

impl Default for JournalOptions {
    fn default() -> Self {
        Self {
            path: None,
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
        }
    }
}

impl JournalOptions {
    pub fn at(path: impl Into<PathBuf>) -> Self {
        Self {
            path: Some(path.into()),
            ..Self::default()
        }
    }
}

/// Reads the complete lines of a journal, cutting off a torn last line.
pub(crate) fn recover_journal(path: &Path) -> Result<Vec<String>> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if complete < bytes.len() {
        log::warn!("{}: dropping {} bytes of an unfinished record", path.display(), bytes.len() - complete);
        let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
        f.set_len(complete as u64).map_err(|e| Error::io(path, e))?;
    }
    let text = std::str::from_utf8(&bytes[..complete]).map_err(|e| Error::Decode {
        path: path.to_owned(),
        offset: e.valid_up_to() as u64,
    })?;
    Ok(text.lines().map(str::to_owned).collect())
}

pub(crate) fn append_lines(path: &Path, lines: &[String]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f: File = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut buf = String::new();
    for l in lines {
        buf.push_str(l);
        buf.push('\n');
    }
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

/// Sends every prompt once per run and returns the calls in (run, prompt)
/// order.
pub fn generate_corpus(plan: &AugmentPlan, lm: &LmClient, journal: &JournalOptions) -> Result<Vec<GenRecord>> {
    plan.validate()?;
    let calls: Vec<(usize, usize)> = (0..plan.runs())
        .flat_map(|r| (0..plan.prompts.len()).map(move |p| (r, p)))
        .collect();

    let mut records = Vec::with_capacity(calls.len());
    if let Some(path) = &journal.path {
        for (n, line) in recover_journal(path)?.iter().enumerate() {
            let rec: GenRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                location: format!("{}:{}", path.display(), n + 1),
                message: e.to_string(),
            })?;
            let matches = calls
                .get(n)
                .is_some_and(|&(r, p)| rec.run == r && rec.prompt_index == p && rec.seed == plan.call_seed(r, p));
            if !matches {
                return Err(Error::Config(format!(
                    "{} line {} does not belong to this plan; remove the journal to start over",
                    path.display(),
                    n + 1
                )));
            }
            records.push(rec);
        }
        if !records.is_empty() {
            log::info!("resuming generation after {} of {} calls", records.len(), calls.len());
        }
    }

    let chunk = journal.checkpoint_every.max(1);
    while records.len() < calls.len() {
        let todo = &calls[records.len()..(records.len() + chunk).min(calls.len())];
        let fresh = fan_out(todo.len(), lm.max_in_flight(), |i| {
            let (run, prompt_index) = todo[i];
            let seed = plan.call_seed(run, prompt_index);
            let params = GenerationParams {
                seed,
                ..plan.gen_params.clone()
            };
            let sequences = lm
                .generate(&plan.prompts[prompt_index], &params)
                .map_err(|e| e.context(format!("generation run {run}, prompt {prompt_index}")))?;
            Ok(GenRecord {
                run,
                prompt_index,
                seed,
                sequences,
            })
        })?;
        if let Some(path) = &journal.path {
            let lines = fresh
                .iter()
                .map(|r| serde_json::to_string(r).map_err(Error::from))
                .collect::<Result<Vec<_>>>()?;
            append_lines(path, &lines)?;
        }
        records.extend(fresh);
    }
    Ok(records)
}

/// Raw generated texts in (run, prompt, sequence) order, preceded by the
/// prompts when the plan keeps them.
pub fn raw_texts(plan: &AugmentPlan, records: &[GenRecord]) -> Vec<String> {
    let prompts = plan.include_prompts.then_some(plan.prompts.iter().cloned());
    prompts
        .into_iter()
        .flatten()
        .chain(records.iter().flat_map(|r| r.sequences.iter().cloned()))
        .collect()
}

/// Abbreviations whose period never ends a sentence.
pub const ABBREVIATIONS: [&str; 18] = [
    "Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "St.", "Jr.", "Sr.", "vs.", "etc.", "e.g.", "i.e.", "No.", "Fig.",
    "approx.", "Inc.", "Ltd.", "Co.",
];

const CLOSERS: &[char] = &['"', '\'', '”', '’', '»', ')', ']', '}'];

fn is_arabic_char(c: char) -> bool {
    matches!(c as u32,
        0x0600..=0x06FF | 0x0750..=0x077F | 0x08A0..=0x08FF | 0xFB50..=0xFDFF | 0xFE70..=0xFEFF)
}

fn arabic_script_lang(lang: &str) -> bool {
    matches!(lang, "ar" | "fa" | "ur" | "ps" | "ku" | "sd")
}

/// Splits text at sentence-final punctuation followed by whitespace or the end
/// of the text, and at every newline.
///
/// Terminals are `.`, `!`, `?` and `…`, plus `؟` and `۔` for Arabic-script
/// languages or text. Closing quotes and brackets right after a terminal stay
/// with the sentence. A period ending one of [`ABBREVIATIONS`] does not split.
pub fn split_sentences(text: &str, lang: &str) -> Vec<String> {
    let arabic = arabic_script_lang(lang) || text.chars().any(is_arabic_char);
    let is_terminal = |c: char| matches!(c, '.' | '!' | '?' | '…') || (arabic && matches!(c, '؟' | '۔'));
    let mut out = Vec::new();
    for line in text.split('\n') {
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let (_, c) = chars[i];
            if !is_terminal(c) {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < chars.len() && is_terminal(chars[j].1) {
                j += 1;
            }
            while j < chars.len() && CLOSERS.contains(&chars[j].1) {
                j += 1;
            }
            let end = chars.get(j).map_or(line.len(), |&(b, _)| b);
            let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
            if at_boundary && !(c == '.' && j == i + 1 && ends_with_abbreviation(&line[start..end])) {
                push_trimmed(&mut out, &line[start..end]);
                start = end;
            }
            i = j;
        }
        push_trimmed(&mut out, &line[start..]);
    }
    out
}

fn ends_with_abbreviation(segment: &str) -> bool {
    let last = segment.split_whitespace().next_back().unwrap_or("");
    let word = last.trim_start_matches(|c: char| !c.is_alphanumeric());
    ABBREVIATIONS.contains(&word)
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t.to_owned());
    }
}

pub const UNKNOWN_LANG: &str = "unknown";

/// Script-based language guess: `"ar"` when Arabic-script letters reach
/// `min_letter_fraction` of all letters, `"en"` likewise for Basic Latin
/// letters, `"unknown"` otherwise (including text without letters).
pub fn detect_language_with(text: &str, min_letter_fraction: f64) -> &'static str {
    let (mut letters, mut arabic, mut latin) = (0usize, 0usize, 0usize);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        letters += 1;
        if is_arabic_char(c) {
            arabic += 1;
        } else if c.is_ascii_alphabetic() {
            latin += 1;
        }
    }
    if letters == 0 {
        return UNKNOWN_LANG;
    }
    let frac = |n: usize| n as f64 / letters as f64;
    if frac(arabic) >= min_letter_fraction {
        "ar"
    } else if frac(latin) >= min_letter_fraction {
        "en"
    } else {
        UNKNOWN_LANG
    }
}

pub fn detect_language(text: &str) -> &'static str {
    detect_language_with(text, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangGuardConfig {
    pub expected: String,
    #[serde(default = "default_fraction")]
    pub min_letter_fraction: f64,
}

fn default_fraction() -> f64 {
    0.5
}

impl LangGuardConfig {
    pub fn new(expected: impl Into<String>) -> Self {
        Self {
            expected: expected.into(),
            min_letter_fraction: default_fraction(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_letter_fraction > 0.0 && self.min_letter_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "min_letter_fraction must lie in (0, 1], got {}",
                self.min_letter_fraction
            )));
        }
        Ok(())
    }
}

fn is_dash_only(line: &str) -> bool {
    line.chars().all(|c| matches!(c, '-' | '–' | '—' | '_') || c.is_whitespace())
}

fn is_filename(line: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\S+\.(pdf|doc|docx|txt|html?|jpg|jpeg|png|xml|csv)$").unwrap())
        .is_match(line.trim())
}

pub const CLEAN_REASONS: [DropReason; 4] = [
    DropReason::Duplicate,
    DropReason::DashOnly,
    DropReason::Filename,
    DropReason::WrongLanguage,
];

/// Drops, in this order: repeats of an earlier line, lines made only of
/// dashes/underscores/whitespace, lone file names, and lines whose detected
/// language is not the expected one.
pub fn clean_generated<I>(name: &str, sentences: I, guard: &LangGuardConfig) -> Result<(Vec<String>, FilterReport)>
where
    I: IntoIterator<Item = String>,
{
    guard.validate()?;
    let mut report = FilterReport::new(name, &CLEAN_REASONS, 5);
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    for line in sentences {
        let reason = if !seen.insert(line.clone()) {
            Some(DropReason::Duplicate)
        } else if is_dash_only(&line) {
            Some(DropReason::DashOnly)
        } else if is_filename(&line) {
            Some(DropReason::Filename)
        } else if detect_language_with(&line, guard.min_letter_fraction) != guard.expected {
            Some(DropReason::WrongLanguage)
        } else {
            None
        };
        match reason {
            Some(r) => report.record_drop(r, &line, None),
            None => {
                report.record_kept();
                kept.push(line);
            }
        }
    }
    Ok((kept, report))
}

/// Translates `lines` in `direction`, journaling completed outputs.
pub fn translate_lines(
    lines: &[String],
    mt: &MtClient,
    params: &TranslationParams,
    direction: &LanguagePair,
    journal: &JournalOptions,
) -> Result<Vec<String>> {
    params.validate()?;
    let mut done = match &journal.path {
        Some(path) => recover_journal(path)?,
        None => Vec::new(),
    };
    if done.len() > lines.len() {
        return Err(Error::Config(format!(
            "translation journal has {} lines but only {} inputs were given",
            done.len(),
            lines.len()
        )));
    }
    let chunk = journal.checkpoint_every.max(1) * params.batch_size;
    while done.len() < lines.len() {
        let from = done.len();
        let to = (from + chunk).min(lines.len());
        let fresh: Vec<String> = mt
            .translate(&lines[from..to], params, direction)
            .map_err(|e| e.context(format!("translating segments {from}..{to} ({direction})")))?
            .into_iter()
            .map(|t| {
                if t.contains('\n') {
                    log::warn!("translation contains a newline; replacing it with a space");
                    t.replace('\n', " ")
                } else {
                    t
                }
            })
            .collect();
        if let Some(path) = &journal.path {
            append_lines(path, &fresh)?;
        }
        done.extend(fresh);
    }
    Ok(done)
}

/// Turns target-language text into pairs `(mt(t), t)`.
///
/// `direction` is the language pair of the bitext being built, so the MT
/// service is asked to translate target → source.
pub fn back_translate(
    targets: &MonoCorpus,
    mt: &MtClient,
    params: &TranslationParams,
    direction: &LanguagePair,
    journal: &JournalOptions,
) -> Result<Corpus> {
    if targets.lang != direction.target {
        return Err(Error::Config(format!(
            "back-translation into {direction} needs {} text, got {}",
            direction.target, targets.lang
        )));
    }
    let sources = translate_lines(&targets.lines, mt, params, &direction.reversed(), journal)?;
    let pairs = sources
        .into_iter()
        .zip(&targets.lines)
        .map(|(s, t)| Ok(SegmentPair::new(s, t.clone(), "back-translated")?.with_tag(Provenance::BackTranslated)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new("back-translated", direction.clone(), pairs))
}

/// Turns source-language text into pairs `(s, mt(s))`.
pub fn forward_translate(
    sources: &MonoCorpus,
    mt: &MtClient,
    params: &TranslationParams,
    direction: &LanguagePair,
    journal: &JournalOptions,
) -> Result<Corpus> {
    if sources.lang != direction.source {
        return Err(Error::Config(format!(
            "forward translation for {direction} needs {} text, got {}",
            direction.source, sources.lang
        )));
    }
    let targets = translate_lines(&sources.lines, mt, params, direction, journal)?;
    let pairs = sources
        .lines
        .iter()
        .zip(targets)
        .map(|(s, t)| Ok(SegmentPair::new(s.clone(), t, "forward-translated")?.with_tag(Provenance::ForwardTranslated)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new("forward-translated", direction.clone(), pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::services::{MockScript, ServiceEndpoint, ServiceSet, TRANSLATE_ROUTE};

    fn services(script: MockScript) -> (ServiceSet, std::sync::Arc<crate::services::MockTransport>) {
        ServiceSet::mock(script, ServiceEndpoint::new("mock://")).unwrap()
    }

    fn prompts(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("public health sentence number {i}.")).collect()
    }

    #[test]
    fn output_count_is_prompts_times_runs_times_sequences() {
        let (s, _) = services(MockScript::default());
        let plan = AugmentPlan::new(prompts(10), vec![1], GenerationParams::default(), "en");
        let recs = generate_corpus(&plan, &s.lm, &JournalOptions::default()).unwrap();
        assert_eq!(raw_texts(&plan, &recs).len(), 50);
        let plan = AugmentPlan::new(prompts(10), vec![1, 2, 3], GenerationParams::default(), "en");
        let recs = generate_corpus(&plan, &s.lm, &JournalOptions::default()).unwrap();
        assert_eq!(raw_texts(&plan, &recs).len(), 150);
        assert_eq!(plan.expected_outputs(), 150);
        let plan = AugmentPlan::new(vec![], vec![1], GenerationParams::default(), "en");
        assert!(generate_corpus(&plan, &s.lm, &JournalOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn records_are_in_run_prompt_order_with_mixed_seeds() {
        let (s, _) = services(MockScript::default());
        let plan = AugmentPlan::new(prompts(3), vec![7, 8], GenerationParams::default(), "en");
        let recs = generate_corpus(&plan, &s.lm, &JournalOptions::default()).unwrap();
        let order: Vec<(usize, usize)> = recs.iter().map(|r| (r.run, r.prompt_index)).collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]);
        assert_eq!(recs[4].seed, mix64(8, 1));
        assert_ne!(recs[0].sequences, recs[3].sequences);
    }

    #[test]
    fn resume_skips_journaled_calls() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.genl");
        let plan = AugmentPlan::new(prompts(5), vec![1], GenerationParams::default(), "en");
        let (s, _) = services(MockScript::default());
        let full = generate_corpus(&plan, &s.lm, &JournalOptions::at(&path)).unwrap();
        // keep two records and half of a third
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        std::fs::write(&path, format!("{}\n{}\n{}", lines[0], lines[1], &lines[2][..10])).unwrap();
        let (s, mock) = services(MockScript::default());
        let resumed = generate_corpus(&plan, &s.lm, &JournalOptions::at(&path)).unwrap();
        assert_eq!(resumed, full);
        assert_eq!(mock.calls().len(), 3);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
    }

    #[test]
    fn sentence_splitting() {
        assert_eq!(split_sentences("A good day. Another one.", "en"), vec!["A good day.", "Another one."]);
        assert_eq!(split_sentences("كيف حالك؟ أنا بخير.", "ar").len(), 2);
        assert_eq!(split_sentences("Dr. Smith arrived.", "en"), vec!["Dr. Smith arrived."]);
        assert_eq!(split_sentences("He said \"stop.\" Then left", "en"), vec!["He said \"stop.\"", "Then left"]);
        assert_eq!(split_sentences("one\n\ntwo", "en"), vec!["one", "two"]);
        assert_eq!(split_sentences("3.5 percent. Wait!? Yes", "en"), vec!["3.5 percent.", "Wait!?", "Yes"]);
        assert!(split_sentences("  \n ", "en").is_empty());
    }

    #[test]
    fn language_detection() {
        assert_eq!(detect_language("مرحبا بكم"), "ar");
        assert_eq!(detect_language("Hello world"), "en");
        assert_eq!(detect_language("12345 %$#"), "unknown");
        assert_eq!(detect_language("Привет мир"), "unknown");
    }

    #[test]
    fn cleaning_rules() {
        let guard = LangGuardConfig::new("ar");
        let input = ["مرحبا بكم", "-----", "report_final.PDF", "Hello world", "مرحبا بكم", "— _ –"];
        let (kept, report) = clean_generated("c", input.iter().map(|s| s.to_string()), &guard).unwrap();
        assert_eq!(kept, vec!["مرحبا بكم"]);
        assert_eq!(report.dropped_for(DropReason::DashOnly), 2);
        assert_eq!(report.dropped_for(DropReason::Filename), 1);
        assert_eq!(report.dropped_for(DropReason::WrongLanguage), 1);
        assert_eq!(report.dropped_for(DropReason::Duplicate), 1);
        assert!(report.is_conserved());
        let (again, _) = clean_generated("c", kept.clone(), &guard).unwrap();
        assert_eq!(again, kept);
    }

    #[test]
    fn back_translation_with_echo() {
        let (s, mock) = services(MockScript::echo());
        let dir = LanguagePair::new("ar", "en");
        let mono = MonoCorpus::new("en", (0..5).map(|i| format!("line {i}")).collect());
        let c = back_translate(&mono, &s.mt, &TranslationParams::default(), &dir, &JournalOptions::default()).unwrap();
        assert_eq!(c.len(), 5);
        for p in &c.pairs {
            assert_eq!(p.source, p.target);
            assert!(p.tags.contains(&Provenance::BackTranslated));
        }
        let call = &mock.calls_to(TRANSLATE_ROUTE)[0];
        assert_eq!(call.body["beam_size"], 5);
        assert_eq!(call.body["source_lang"], "en");
        assert_eq!(call.body["target_lang"], "ar");
        let empty = MonoCorpus::new("en", vec![]);
        assert!(back_translate(&empty, &s.mt, &TranslationParams::default(), &dir, &JournalOptions::default())
            .unwrap()
            .is_empty());
        let wrong = MonoCorpus::new("ar", vec!["x".into()]);
        assert!(back_translate(&wrong, &s.mt, &TranslationParams::default(), &dir, &JournalOptions::default()).is_err());
    }

    #[test]
    fn forward_translation_preserves_order() {
        let (s, _) = services(MockScript::default());
        let dir = LanguagePair::new("en", "ar");
        let mono = MonoCorpus::new("en", (0..100).map(|i| format!("s{i}")).collect());
        let c = forward_translate(&mono, &s.mt, &TranslationParams::default(), &dir, &JournalOptions::default()).unwrap();
        for (i, p) in c.pairs.iter().enumerate() {
            assert_eq!(p.source, format!("s{i}"));
            assert_eq!(p.target, format!("[ar] s{i}"));
            assert!(p.tags.contains(&Provenance::ForwardTranslated));
        }
    }

    #[test]
    fn translation_journal_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bt.txt");
        std::fs::write(&path, "already done\nparti").unwrap();
        let (s, mock) = services(MockScript::echo());
        let lines: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let out = translate_lines(&lines, &s.mt, &TranslationParams::default(), &LanguagePair::new("en", "ar"), &JournalOptions::at(&path))
            .unwrap();
        assert_eq!(out, vec!["already done", "b", "c"]);
        assert_eq!(mock.calls()[0].body["texts"], serde_json::json!(["b", "c"]));
    }
}
