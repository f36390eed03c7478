//! Segment pairs, line-aligned bitext I/O, manifests and seeded splits.
//!
//! Text is read byte-for-byte: the only transformation on read is removal of
//! the terminating `\n` of each line.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Where a segment came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Authentic,
    LmGenerated,
    BackTranslated,
    ForwardTranslated,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Authentic => "authentic",
            Provenance::LmGenerated => "lm-generated",
            Provenance::BackTranslated => "back-translated",
            Provenance::ForwardTranslated => "forward-translated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentPair {
    pub source: String,
    pub target: String,
    pub origin: String,
    #[serde(default)]
    pub tags: BTreeSet<Provenance>,
}

impl SegmentPair {
    /// Builds a pair, rejecting embedded newlines and an empty origin.
    pub fn new(
        source: impl Into<String>,
        target: impl Into<String>,
        origin: impl Into<String>,
    ) -> Result<Self> {
        let pair = Self {
            source: source.into(),
            target: target.into(),
            origin: origin.into(),
            tags: BTreeSet::new(),
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn with_tag(mut self, tag: Provenance) -> Self {
        self.tags.insert(tag);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.source.contains('\n') || self.target.contains('\n') {
            return Err(Error::Invalid(format!(
                "segment from {:?} contains a newline",
                self.origin
            )));
        }
        if self.origin.is_empty() {
            return Err(Error::Invalid("segment origin is empty".into()));
        }
        Ok(())
    }
}

/// Language pair of a bitext, e.g. `ar` → `en`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LanguagePair {
    pub source: String,
    pub target: String,
}

impl LanguagePair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
        }
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.target.clone(), self.source.clone())
    }
}

impl std::fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

/// An in-memory parallel corpus with its language pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub langs: LanguagePair,
    pub pairs: Vec<SegmentPair>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, langs: LanguagePair, pairs: Vec<SegmentPair>) -> Self {
        Self {
            name: name.into(),
            langs,
            pairs,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Monolingual text in one language, one segment per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonoCorpus {
    pub lang: String,
    pub lines: Vec<String>,
}

impl MonoCorpus {
    pub fn new(lang: impl Into<String>, lines: Vec<String>) -> Self {
        Self {
            lang: lang.into(),
            lines,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedBy {
    pub operation: String,
    #[serde(default)]
    pub parameters: serde_json::Value,
}

impl CreatedBy {
    pub fn new(operation: impl Into<String>, parameters: serde_json::Value) -> Self {
        Self {
            operation: operation.into(),
            parameters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub name: String,
    pub segment_count: usize,
    pub source_lang: String,
    pub target_lang: String,
    /// `sha256:` + hex(sha256(sha256(source file) ‖ sha256(target file))).
    pub checksum: String,
    pub created_by: CreatedBy,
}

impl CorpusManifest {
    pub fn file_name(name: &str) -> String {
        format!("{name}.manifest.json")
    }

    /// Writes `<dir>/<name>.manifest.json` and returns its path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(Self::file_name(&self.name));
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Source/target file locations of a line-aligned bitext.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitextPaths {
    pub source: PathBuf,
    pub target: PathBuf,
}

impl BitextPaths {
    pub fn new(source: impl Into<PathBuf>, target: impl Into<PathBuf>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
        }
    }

    /// `<dir>/<stem>.<src>` and `<dir>/<stem>.<tgt>`.
    pub fn in_dir(dir: &Path, stem: &str, langs: &LanguagePair) -> Self {
        Self::new(
            dir.join(format!("{stem}.{}", langs.source)),
            dir.join(format!("{stem}.{}", langs.target)),
        )
    }
}

/// Streaming line reader that reports UTF-8 failures with absolute byte offsets.
pub struct LineReader {
    path: PathBuf,
    reader: BufReader<File>,
    offset: u64,
    buf: Vec<u8>,
}

impl LineReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            reader: BufReader::new(file),
            offset: 0,
            buf: Vec::new(),
        })
    }

    fn next_line(&mut self) -> Option<Result<String>> {
        self.buf.clear();
        let start = self.offset;
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => None,
            Ok(n) => {
                self.offset += n as u64;
                if self.buf.last() == Some(&b'\n') {
                    self.buf.pop();
                }
                Some(match std::str::from_utf8(&self.buf) {
                    Ok(s) => Ok(s.to_owned()),
                    Err(e) => Err(Error::Decode {
                        path: self.path.clone(),
                        offset: start + e.valid_up_to() as u64,
                    }),
                })
            }
            Err(e) => Some(Err(Error::io(&self.path, e))),
        }
    }
}

impl Iterator for LineReader {
    type Item = Result<String>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_line()
    }
}

/// Counts lines without decoding. A final line lacking `\n` still counts.
pub fn count_lines(path: &Path) -> Result<usize> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 16, file);
    let mut count = 0usize;
    let mut last = b'\n';
    loop {
        let chunk = reader.fill_buf().map_err(|e| Error::io(path, e))?;
        if chunk.is_empty() {
            break;
        }
        count += chunk.iter().filter(|&&b| b == b'\n').count();
        last = *chunk.last().unwrap();
        let n = chunk.len();
        reader.consume(n);
    }
    if last != b'\n' {
        count += 1;
    }
    Ok(count)
}

/// Stream of pairs from two line-aligned files.
pub struct ParallelReader {
    source: LineReader,
    target: LineReader,
    origin: String,
    tags: BTreeSet<Provenance>,
}

impl ParallelReader {
    pub fn with_tag(mut self, tag: Provenance) -> Self {
        self.tags.insert(tag);
        self
    }
}

impl Iterator for ParallelReader {
    type Item = Result<SegmentPair>;

    fn next(&mut self) -> Option<Self::Item> {
        let source = self.source.next()?;
        let target = match self.target.next() {
            Some(t) => t,
            None => {
                return Some(Err(Error::Invalid(
                    "target file ended early (was it modified while reading?)".into(),
                )))
            }
        };
        Some(source.and_then(|source| {
            target.map(|target| SegmentPair {
                source,
                target,
                origin: self.origin.clone(),
                tags: self.tags.clone(),
            })
        }))
    }
}

/// Opens a line-aligned bitext. Line counts are checked up front so that a
/// misaligned pair of files fails before any pair is produced.
pub fn read_parallel(
    source_path: &Path,
    target_path: &Path,
    origin: &str,
) -> Result<ParallelReader> {
    if origin.is_empty() {
        return Err(Error::Invalid("origin must not be empty".into()));
    }
    let source_lines = count_lines(source_path)?;
    let target_lines = count_lines(target_path)?;
    if source_lines != target_lines {
        return Err(Error::Alignment {
            source_lines,
            target_lines,
        });
    }
    Ok(ParallelReader {
        source: LineReader::open(source_path)?,
        target: LineReader::open(target_path)?,
        origin: origin.to_owned(),
        tags: BTreeSet::new(),
    })
}

/// Reads a single-file `source<TAB>target` bitext.
pub fn read_tsv(path: &Path, origin: &str) -> Result<impl Iterator<Item = Result<SegmentPair>>> {
    let origin = origin.to_owned();
    let display = path.display().to_string();
    let lines = LineReader::open(path)?;
    Ok(lines.enumerate().map(move |(i, line)| {
        let line = line?;
        let (src, tgt) = line.split_once('\t').ok_or_else(|| Error::Parse {
            location: format!("{display}:{}", i + 1),
            message: "expected source<TAB>target".into(),
        })?;
        Ok(SegmentPair {
            source: src.to_owned(),
            target: tgt.to_owned(),
            origin: origin.clone(),
            tags: BTreeSet::new(),
        })
    }))
}

/// Collects a fallible pair stream into a [`Corpus`].
pub fn load_corpus(
    paths: &BitextPaths,
    name: &str,
    langs: &LanguagePair,
    tag: Option<Provenance>,
) -> Result<Corpus> {
    let mut reader = read_parallel(&paths.source, &paths.target, name)?;
    if let Some(tag) = tag {
        reader = reader.with_tag(tag);
    }
    let pairs = reader.collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(name, langs.clone(), pairs))
}

/// Naming and provenance data recorded in a written corpus' manifest.
#[derive(Debug, Clone)]
pub struct ManifestInfo {
    pub name: String,
    pub langs: LanguagePair,
    pub created_by: CreatedBy,
}

impl ManifestInfo {
    pub fn new(name: impl Into<String>, langs: LanguagePair, created_by: CreatedBy) -> Self {
        Self {
            name: name.into(),
            langs,
            created_by,
        }
    }
}

struct HashingWriter {
    out: BufWriter<File>,
    hash: Sha256,
}

impl HashingWriter {
    fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            out: BufWriter::new(file),
            hash: Sha256::new(),
        })
    }

    fn line(&mut self, text: &str) -> std::io::Result<()> {
        self.out.write_all(text.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.hash.update(text.as_bytes());
        self.hash.update(b"\n");
        Ok(())
    }

    fn finish(mut self) -> std::io::Result<[u8; 32]> {
        self.out.flush()?;
        Ok(self.hash.finalize().into())
    }
}

fn combine_digests(source: &[u8; 32], target: &[u8; 32]) -> String {
    let mut h = Sha256::new();
    h.update(source);
    h.update(target);
    format!("sha256:{}", hex::encode(h.finalize()))
}

/// Writes pairs as two LF-terminated, line-aligned files.
pub fn write_parallel<I>(pairs: I, paths: &BitextPaths, info: ManifestInfo) -> Result<CorpusManifest>
where
    I: IntoIterator<Item = Result<SegmentPair>>,
{
    let mut src = HashingWriter::create(&paths.source)?;
    let mut tgt = HashingWriter::create(&paths.target)?;
    let mut written = 0usize;
    for pair in pairs {
        let pair = pair?;
        pair.validate()?;
        src.line(&pair.source)
            .and_then(|_| tgt.line(&pair.target))
            .map_err(|source| Error::PartialWrite { written, source })?;
        written += 1;
    }
    let s = src
        .finish()
        .map_err(|source| Error::PartialWrite { written, source })?;
    let t = tgt
        .finish()
        .map_err(|source| Error::PartialWrite { written, source })?;
    Ok(CorpusManifest {
        name: info.name,
        segment_count: written,
        source_lang: info.langs.source,
        target_lang: info.langs.target,
        checksum: combine_digests(&s, &t),
        created_by: info.created_by,
    })
}

/// Writes `lines` one per line and returns the count.
pub fn write_lines<'a, I>(lines: I, path: &Path) -> Result<usize>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = HashingWriter::create(path)?;
    let mut written = 0usize;
    for line in lines {
        if line.contains('\n') {
            return Err(Error::Invalid(format!("line {written} contains a newline")));
        }
        out.line(line)
            .map_err(|source| Error::PartialWrite { written, source })?;
        written += 1;
    }
    out.finish()
        .map_err(|source| Error::PartialWrite { written, source })?;
    Ok(written)
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    LineReader::open(path)?.collect()
}

/// Checksum of a bitext in memory, identical to what [`write_parallel`] records.
pub fn bitext_checksum<'a>(pairs: impl IntoIterator<Item = &'a SegmentPair>) -> String {
    let mut s = Sha256::new();
    let mut t = Sha256::new();
    for p in pairs {
        s.update(p.source.as_bytes());
        s.update(b"\n");
        t.update(p.target.as_bytes());
        t.update(b"\n");
    }
    combine_digests(&s.finalize().into(), &t.finalize().into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub dev_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            dev_size: 5000,
            test_size: 5000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded dev/test sampling without replacement.
///
/// Dev takes the first `dev_size` draws and test the next `test_size`, both
/// in draw order; train keeps the remaining items in corpus order.
pub fn sample_split<T: Clone>(corpus: &[T], cfg: &SplitConfig) -> Result<Split<T>> {
    let required = cfg.dev_size + cfg.test_size;
    if corpus.len() < required {
        return Err(Error::Size {
            what: "corpus too small for dev+test split".into(),
            required,
            actual: corpus.len(),
        });
    }
    let mut rng = SeededRng::new(cfg.seed);
    let drawn = rng.sample_indices(corpus.len(), required);
    let mut held_out = vec![false; corpus.len()];
    for &i in &drawn {
        held_out[i] = true;
    }
    let dev = drawn[..cfg.dev_size].iter().map(|&i| corpus[i].clone()).collect();
    let test = drawn[cfg.dev_size..].iter().map(|&i| corpus[i].clone()).collect();
    let train = corpus
        .iter()
        .zip(&held_out)
        .filter(|(_, &h)| !h)
        .map(|(p, _)| p.clone())
        .collect();
    Ok(Split { train, dev, test })
}

/// Chains streams in list order.
pub fn concat<I>(streams: Vec<I>) -> impl Iterator<Item = I::Item>
where
    I: Iterator,
{
    streams.into_iter().flatten()
}

/// Concatenates in-memory corpora after checking they share a language pair.
pub fn concat_corpora(name: &str, corpora: &[Corpus]) -> Result<Corpus> {
    let langs = match corpora.first() {
        Some(c) => c.langs.clone(),
        None => return Err(Error::Invalid("no corpora to concatenate".into())),
    };
    if let Some(bad) = corpora.iter().find(|c| c.langs != langs) {
        return Err(Error::Invalid(format!(
            "corpus {:?} is {} but {} was expected",
            bad.name, bad.langs, langs
        )));
    }
    let pairs = concat(corpora.iter().map(|c| c.pairs.iter().cloned()).collect()).collect();
    Ok(Corpus::new(name, langs, pairs))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })
}
