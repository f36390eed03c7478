//! Command-line front end. Each subcommand wraps one library operation.
//!
//! `--config FILE` (TOML, or JSON by extension) supplies defaults for the
//! `rules`, `semantic`, `generation`, `translation`, `mix` and `services`
//! sections; flags override them. `--mock FILE` answers every service call
//! from a mock script. Exit status: 0 success, 1 usage or configuration
//! error, 2 data error, 3 service error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use crate::augment::{
    back_translate, clean_generated, forward_translate, generate_corpus, raw_texts, split_sentences, AugmentPlan,
    JournalOptions, LangGuardConfig,
};
use crate::ckpt::{average, read_archive, write_archive};
use crate::corpus::{
    load_corpus, read_lines, sample_split, write_json, write_lines, write_parallel, BitextPaths, CreatedBy,
    LanguagePair, ManifestInfo, MonoCorpus, SplitConfig,
};
use crate::error::{Error, Result};
use crate::filters::{apply_rules, semantic_filter, RuleConfig, SemanticConfig};
use crate::humeval::{aggregate, load_records, run_session, sample_eval_set, SessionConfig, DEFAULT_EVAL_SIZE};
use crate::metrics::{bleu, chrfpp, spbleu, ter, Metric, Smoothing, TerConfig, Tokenize};
use crate::mixer::{build_mix, emit_training_files, sample_generic, MixMode, MixPlan};
use crate::pipeline::{run_setup, verify_output, PipelineConfig, ServicesConfig};
use crate::rng::mix64;
use crate::services::{GenerationParams, MockScript, ServiceEndpoint, ServiceSet, TranslationParams};
use crate::subword::SubwordModel;

#[derive(Debug, Parser)]
#[command(name = "domainsmith", version, about = "Domain-adaptation data toolkit for machine translation")]
pub struct Cli {
    /// TOML or JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Answer all service calls from this mock script.
    #[arg(long, global = true)]
    pub mock: Option<PathBuf>,
    /// Global seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rule-based bitext filtering.
    Filter(FilterArgs),
    /// Embedding-similarity bitext filtering.
    Semfilter(SemfilterArgs),
    /// Seeded dev/test/train split of a bitext.
    Split(SplitArgs),
    /// Prompt the language model and clean the generated sentences.
    Generate(GenerateArgs),
    /// Turn target-language text into a bitext by translating it.
    Backtranslate(TranslateArgs),
    /// Turn source-language text into a bitext by translating it.
    Forwardtranslate(TranslateArgs),
    /// Build an oversampled in-domain/generic training mix.
    Mix(MixArgs),
    /// Score hypotheses against references.
    Score(ScoreArgs),
    /// Average tensor archives.
    AvgCheckpoints(AvgArgs),
    /// Blind human rating sessions.
    Humeval {
        #[command(subcommand)]
        action: HumevalCommand,
    },
    /// Run Setup 1 or Setup 2 end to end.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct BitextArgs {
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    /// Source language code; defaults to the source file's extension.
    #[arg(long)]
    pub src_lang: Option<String>,
    /// Target language code; defaults to the target file's extension.
    #[arg(long)]
    pub tgt_lang: Option<String>,
}

impl BitextArgs {
    fn paths(&self) -> BitextPaths {
        BitextPaths::new(&self.src, &self.tgt)
    }

    fn langs(&self) -> Result<LanguagePair> {
        Ok(LanguagePair::new(
            lang_of(self.src_lang.as_deref(), &self.src, "--src-lang")?,
            lang_of(self.tgt_lang.as_deref(), &self.tgt, "--tgt-lang")?,
        ))
    }
}

fn lang_of(given: Option<&str>, path: &Path, flag: &str) -> Result<String> {
    given
        .map(str::to_owned)
        .or_else(|| path.extension().map(|e| e.to_string_lossy().into_owned()))
        .ok_or_else(|| Error::Usage(format!("cannot tell the language of {}; pass {flag}", path.display())))
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub input: BitextArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Output file stem and report name.
    #[arg(long, default_value = "filtered")]
    pub name: String,
    #[arg(long)]
    pub max_words: Option<usize>,
    #[arg(long)]
    pub max_ratio: Option<f64>,
    #[arg(long)]
    pub keep_duplicates: bool,
    #[arg(long)]
    pub keep_source_copies: bool,
}

#[derive(Debug, Args)]
pub struct SemfilterArgs {
    #[command(flatten)]
    pub input: BitextArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "semantic")]
    pub name: String,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Also write one similarity per input pair.
    #[arg(long)]
    pub log_similarities: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub input: BitextArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub dev_size: usize,
    #[arg(long, default_value_t = 5000)]
    pub test_size: usize,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// One prompt per line.
    #[arg(long)]
    pub prompts: PathBuf,
    /// Language of prompts and generated text.
    #[arg(long)]
    pub lang: String,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Number of runs, each with a seed derived from the global seed.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Explicit run seeds (repeatable); overrides --runs.
    #[arg(long = "run-seed")]
    pub run_seeds: Vec<u64>,
    #[arg(long)]
    pub include_prompts: bool,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    /// One segment per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub src_lang: String,
    #[arg(long)]
    pub tgt_lang: String,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub beam_size: Option<u32>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Block,
    Probabilistic,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    pub in_src: PathBuf,
    #[arg(long)]
    pub in_tgt: PathBuf,
    #[arg(long)]
    pub generic_src: PathBuf,
    #[arg(long)]
    pub generic_tgt: PathBuf,
    #[arg(long)]
    pub src_lang: Option<String>,
    #[arg(long)]
    pub tgt_lang: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub size_ratio: Option<usize>,
    /// In-domain weight; the generic weight is its complement.
    #[arg(long)]
    pub in_domain_weight: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Use the generic files as they are instead of sampling size_ratio × in-domain pairs.
    #[arg(long)]
    pub no_sample: bool,
    #[arg(long)]
    pub sequence_controls: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Bleu,
    Spbleu,
    Chrfpp,
    Ter,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TokenizeArg {
    #[value(name = "13a")]
    ThirteenA,
    None,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long, value_enum)]
    pub metric: MetricArg,
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Subword model for spBLEU (piece<TAB>log-prob).
    #[arg(long)]
    pub subword_model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "13a")]
    pub tokenize: TokenizeArg,
    /// Disable BLEU smoothing.
    #[arg(long)]
    pub no_smooth: bool,
    /// Case-insensitive TER.
    #[arg(long)]
    pub ter_lowercase: bool,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AvgArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated weights, one per input.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum HumevalCommand {
    /// Rate system outputs interactively.
    Run(HumevalRunArgs),
    /// Per-system means and percentages from a ratings file.
    Aggregate {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct HumevalRunArgs {
    #[command(flatten)]
    pub test: BitextArgs,
    /// `NAME=FILE`, one output line per test segment; repeatable.
    #[arg(long = "system", required = true)]
    pub systems: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_EVAL_SIZE)]
    pub n: usize,
    #[arg(long)]
    pub ratings: PathBuf,
    #[arg(long, default_value = "rater1")]
    pub rater: String,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub setup: u8,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Setup 1 in-domain bitext.
    #[arg(long)]
    pub in_domain_src: Option<PathBuf>,
    #[arg(long)]
    pub in_domain_tgt: Option<PathBuf>,
    /// Setup 2 in-domain source text.
    #[arg(long)]
    pub in_domain_source: Option<PathBuf>,
}

/// Configuration sections shared by the subcommands.
struct ConfigFile {
    path: Option<PathBuf>,
    value: serde_json::Value,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self {
                path: None,
                value: serde_json::Value::Null,
            });
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            let t: toml::Value =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            serde_json::to_value(t)?
        };
        Ok(Self {
            path: Some(path.to_owned()),
            value,
        })
    }

    fn section<T: DeserializeOwned + Default>(&self, key: &str) -> Result<T> {
        match self.value.get(key) {
            None => Ok(T::default()),
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("section [{key}]: {e}"))),
        }
    }

    fn seed(&self) -> Option<u64> {
        self.value.get("seed").and_then(|v| v.as_u64())
    }
}

struct Context {
    config: ConfigFile,
    mock: Option<PathBuf>,
    seed: u64,
    /// `--seed` as given, for commands whose configuration carries its own seed.
    seed_flag: Option<u64>,
}

impl Context {
    fn services(&self) -> Result<ServiceSet> {
        if let Some(path) = &self.mock {
            return Ok(ServiceSet::mock(MockScript::load(path)?, ServiceEndpoint::new("mock://"))?.0);
        }
        let mut svc: ServicesConfig = self.config.section("services")?;
        if let (Some(m), Some(cfg)) = (&mut svc.mock, &self.config.path) {
            if m.is_relative() {
                *m = cfg.parent().unwrap_or(Path::new("")).join(&*m);
            }
        }
        svc.connect()
    }
}

fn journal(out_dir: &Path, name: &str) -> JournalOptions {
    JournalOptions::at(out_dir.join("work").join(name))
}

fn save_bitext(dir: &Path, stem: &str, langs: &LanguagePair, pairs: &[crate::corpus::SegmentPair], op: &str) -> Result<()> {
    let info = ManifestInfo::new(stem, langs.clone(), CreatedBy::new(op, serde_json::json!({})));
    let manifest = write_parallel(pairs.iter().cloned().map(Ok), &BitextPaths::in_dir(dir, stem, langs), info)?;
    manifest.save(dir)?;
    eprintln!("{stem}: {} pairs written to {}", manifest.segment_count, dir.display());
    Ok(())
}

fn cmd_filter(ctx: &Context, a: &FilterArgs) -> Result<()> {
    let mut cfg: RuleConfig = ctx.config.section("rules")?;
    if let Some(w) = a.max_words {
        cfg.max_words = w;
    }
    if let Some(r) = a.max_ratio {
        cfg.max_length_ratio = r;
    }
    cfg.drop_duplicates &= !a.keep_duplicates;
    cfg.drop_source_copies &= !a.keep_source_copies;
    let langs = a.input.langs()?;
    let corpus = load_corpus(&a.input.paths(), &a.name, &langs, None)?;
    let (kept, report) = apply_rules(&a.name, corpus.pairs, &cfg)?;
    save_bitext(&a.out_dir, &a.name, &langs, &kept, "apply_rules")?;
    report.save(&a.out_dir)?;
    report.write_rejects_tsv(&a.out_dir.join(format!("{}.rejects.tsv", a.name)))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_semfilter(ctx: &Context, a: &SemfilterArgs) -> Result<()> {
    let mut cfg: SemanticConfig = ctx.config.section("semantic")?;
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    cfg.log_similarities |= a.log_similarities;
    cfg.validate()?;
    let langs = a.input.langs()?;
    let corpus = load_corpus(&a.input.paths(), &a.name, &langs, None)?;
    let services = ctx.services()?;
    let out = semantic_filter(&a.name, corpus.pairs, &cfg, &services.embed)?;
    save_bitext(&a.out_dir, &a.name, &langs, &out.kept, "semantic_filter")?;
    out.report.save(&a.out_dir)?;
    if let Some(sims) = &out.similarities {
        let lines: Vec<String> = sims.iter().map(|s| format!("{s:.6}")).collect();
        write_lines(lines.iter().map(String::as_str), &a.out_dir.join(format!("{}.similarities.txt", a.name)))?;
    }
    println!("{}", serde_json::to_string_pretty(&out.report)?);
    Ok(())
}

fn cmd_split(ctx: &Context, a: &SplitArgs) -> Result<()> {
    let langs = a.input.langs()?;
    let corpus = load_corpus(&a.input.paths(), "corpus", &langs, None)?;
    let cfg = SplitConfig {
        dev_size: a.dev_size,
        test_size: a.test_size,
        seed: ctx.seed,
    };
    let split = sample_split(&corpus.pairs, &cfg)?;
    for (stem, pairs) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
        save_bitext(&a.out_dir, stem, &langs, pairs, "sample_split")?;
    }
    Ok(())
}

fn cmd_generate(ctx: &Context, a: &GenerateArgs) -> Result<()> {
    let prompts = read_lines(&a.prompts)?;
    let seeds = if a.run_seeds.is_empty() {
        (0..a.runs).map(|r| mix64(ctx.seed, 0x100 + r as u64)).collect()
    } else {
        a.run_seeds.clone()
    };
    let params: GenerationParams = ctx.config.section("generation")?;
    let mut plan = AugmentPlan::new(prompts, seeds, params, a.lang.clone());
    plan.include_prompts = a.include_prompts;
    let services = ctx.services()?;
    let records = generate_corpus(&plan, &services.lm, &journal(&a.out_dir, "generated.genl"))?;
    let sentences: Vec<String> = raw_texts(&plan, &records)
        .iter()
        .flat_map(|t| split_sentences(t, &a.lang))
        .collect();
    write_lines(sentences.iter().map(String::as_str), &a.out_dir.join("sentences.txt"))?;
    let (kept, report) = clean_generated("clean", sentences, &LangGuardConfig::new(a.lang.clone()))?;
    write_lines(kept.iter().map(String::as_str), &a.out_dir.join(format!("generated.{}", a.lang)))?;
    report.save(&a.out_dir)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn translation_params(ctx: &Context, a: &TranslateArgs) -> Result<TranslationParams> {
    let mut p: TranslationParams = ctx.config.section("translation")?;
    if let Some(b) = a.beam_size {
        p.beam_size = b;
    }
    if let Some(b) = a.batch_size {
        p.batch_size = b;
    }
    Ok(p)
}

fn cmd_translate(ctx: &Context, a: &TranslateArgs, backward: bool) -> Result<()> {
    let langs = LanguagePair::new(&a.src_lang, &a.tgt_lang);
    let params = translation_params(ctx, a)?;
    let services = ctx.services()?;
    let lines = read_lines(&a.input)?;
    let corpus = if backward {
        let mono = MonoCorpus::new(&a.tgt_lang, lines);
        back_translate(&mono, &services.mt, &params, &langs, &journal(&a.out_dir, "back_translate.journal"))?
    } else {
        let mono = MonoCorpus::new(&a.src_lang, lines);
        forward_translate(&mono, &services.mt, &params, &langs, &journal(&a.out_dir, "forward_translate.journal"))?
    };
    let op = if backward { "back_translate" } else { "forward_translate" };
    save_bitext(&a.out_dir, &corpus.name, &langs, &corpus.pairs, op)
}

fn cmd_mix(ctx: &Context, a: &MixArgs) -> Result<()> {
    let langs = LanguagePair::new(
        lang_of(a.src_lang.as_deref(), &a.in_src, "--src-lang")?,
        lang_of(a.tgt_lang.as_deref(), &a.in_tgt, "--tgt-lang")?,
    );
    let mut plan: MixPlan = ctx.config.section("mix")?;
    plan.seed = mix64(ctx.seed, 1);
    if let Some(m) = a.mode {
        plan.mode = match m {
            ModeArg::Block => MixMode::Block,
            ModeArg::Probabilistic => MixMode::Probabilistic,
        };
    }
    if let Some(r) = a.size_ratio {
        plan.size_ratio = r;
    }
    if let Some(w) = a.in_domain_weight {
        plan.weights = (w, 1.0 - w);
    }
    if let Some(e) = a.epochs {
        plan.epochs = e;
    }
    plan.add_sequence_controls |= a.sequence_controls;
    plan.validate()?;

    let in_domain = load_corpus(&BitextPaths::new(&a.in_src, &a.in_tgt), "in-domain", &langs, None)?;
    let generic = load_corpus(&BitextPaths::new(&a.generic_src, &a.generic_tgt), "generic", &langs, None)?;
    let generic = if a.no_sample {
        generic.pairs
    } else {
        sample_generic(&generic.pairs, in_domain.len() * plan.size_ratio, mix64(ctx.seed, 2))?
    };
    let stream = build_mix(&plan, &in_domain.pairs, &generic)?;
    let paths = BitextPaths::in_dir(&a.out_dir, "train", &langs);
    let manifest = emit_training_files(stream, &paths, &langs, plan.add_sequence_controls)?;
    manifest.save(&a.out_dir)?;
    println!("{}", serde_json::to_string_pretty(&manifest)?);
    Ok(())
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let hyps = read_lines(&a.hyp)?;
    let refs = read_lines(&a.reference)?;
    let tokenize = match a.tokenize {
        TokenizeArg::ThirteenA => Tokenize::ThirteenA,
        TokenizeArg::None => Tokenize::None,
    };
    let metric = match a.metric {
        MetricArg::Bleu => Metric::Bleu,
        MetricArg::Spbleu => Metric::Spbleu,
        MetricArg::Chrfpp => Metric::Chrfpp,
        MetricArg::Ter => Metric::Ter,
    };
    let report = match metric {
        Metric::Bleu => {
            let smooth = if a.no_smooth { Smoothing::None } else { Smoothing::Exponential };
            bleu(&hyps, &refs, tokenize, smooth)?
        }
        Metric::Spbleu => {
            let path = a
                .subword_model
                .as_ref()
                .ok_or_else(|| Error::Usage("spbleu needs --subword-model".into()))?;
            spbleu(&hyps, &refs, &SubwordModel::load(path)?)?
        }
        Metric::Chrfpp => chrfpp(&hyps, &refs)?,
        Metric::Ter => {
            let cfg = TerConfig {
                case_sensitive: !a.ter_lowercase,
                ..TerConfig::default()
            };
            ter(&hyps, &refs, &cfg)?
        }
    };
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    eprintln!("{}", report.summary_line());
    Ok(())
}

fn cmd_avg(a: &AvgArgs) -> Result<()> {
    let archives = a.inputs.iter().map(|p| read_archive(p)).collect::<Result<Vec<_>>>()?;
    let avg = average(&archives, a.weights.as_deref())?;
    write_archive(&avg, &a.out)?;
    eprintln!("averaged {} archives into {} ({})", archives.len(), a.out.display(), avg.checksum()?);
    Ok(())
}

fn cmd_humeval(ctx: &Context, action: &HumevalCommand) -> Result<()> {
    match action {
        HumevalCommand::Run(a) => {
            let langs = a.test.langs()?;
            let test = load_corpus(&a.test.paths(), "test", &langs, None)?;
            let mut outputs = BTreeMap::new();
            for spec in &a.systems {
                let (name, file) = spec
                    .split_once('=')
                    .ok_or_else(|| Error::Usage(format!("--system expects NAME=FILE, got {spec:?}")))?;
                outputs.insert(name.to_owned(), read_lines(Path::new(file))?);
            }
            let items = sample_eval_set(&test.pairs, a.n, ctx.seed)?;
            let mut cfg = SessionConfig::new(&a.rater, ctx.seed, &a.ratings);
            let stdin = std::io::stdin();
            let mut input = stdin.lock();
            let mut out = std::io::stdout();
            let outcome = run_session(&items, &outputs, &mut cfg, &mut input, &mut out)?;
            out.flush().ok();
            if !outcome.completed {
                eprintln!("{} items left; rerun the same command to continue", outcome.items_remaining);
            }
            Ok(())
        }
        HumevalCommand::Aggregate { ratings, out } => {
            let report = aggregate(&load_records(ratings)?)?;
            if let Some(out) = out {
                report.save(out)?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

fn cmd_pipeline(ctx: &Context, a: &PipelineArgs) -> Result<()> {
    let path = ctx
        .config
        .path
        .as_ref()
        .ok_or_else(|| Error::Usage("pipeline needs --config".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(s) = cfg.setup {
        if s != a.setup {
            return Err(Error::Usage(format!(
                "--setup {} conflicts with setup = {s} in {}",
                a.setup,
                path.display()
            )));
        }
    }
    match a.setup {
        1 if a.in_domain_source.is_some() => {
            return Err(Error::Usage("--in-domain-source is a setup 2 input".into()));
        }
        2 if a.in_domain_src.is_some() || a.in_domain_tgt.is_some() => {
            return Err(Error::Usage("--in-domain-src/--in-domain-tgt are setup 1 inputs".into()));
        }
        _ => {}
    }
    match (&a.in_domain_src, &a.in_domain_tgt) {
        (Some(s), Some(t)) => cfg.in_domain = Some(BitextPaths::new(s, t)),
        (None, None) => {}
        _ => return Err(Error::Usage("--in-domain-src and --in-domain-tgt go together".into())),
    }
    if let Some(s) = &a.in_domain_source {
        cfg.in_domain_source = Some(s.clone());
    }
    if let Some(o) = &a.out_dir {
        cfg.output_dir = o.clone();
    }
    if let Some(m) = &ctx.mock {
        cfg.services.mock = Some(m.clone());
    }
    if let Some(s) = ctx.seed_flag {
        cfg.seed = s;
    }
    cfg.validate(a.setup)?;
    let services = cfg.services.connect()?;
    let manifest = run_setup(&cfg, a.setup, &services)?;
    verify_output(&cfg.output_dir)?;
    println!("{}", serde_json::to_string_pretty(&manifest.counts)?);
    eprintln!("pipeline complete: {}", cfg.output_dir.display());
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let config = ConfigFile::load(cli.config.as_deref())?;
    let seed = cli.seed.or(config.seed()).unwrap_or(0);
    let ctx = Context {
        config,
        mock: cli.mock,
        seed,
        seed_flag: cli.seed,
    };
    match &cli.command {
        Command::Filter(a) => cmd_filter(&ctx, a),
        Command::Semfilter(a) => cmd_semfilter(&ctx, a),
        Command::Split(a) => cmd_split(&ctx, a),
        Command::Generate(a) => cmd_generate(&ctx, a),
        Command::Backtranslate(a) => cmd_translate(&ctx, a, true),
        Command::Forwardtranslate(a) => cmd_translate(&ctx, a, false),
        Command::Mix(a) => cmd_mix(&ctx, a),
        Command::Score(a) => cmd_score(a),
        Command::AvgCheckpoints(a) => cmd_avg(a),
        Command::Humeval { action } => cmd_humeval(&ctx, action),
        Command::Pipeline(a) => cmd_pipeline(&ctx, a),
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
