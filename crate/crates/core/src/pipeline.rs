//! The two end-to-end setups.
//!
//! Setup 1 starts from a small in-domain bitext, Setup 2 from in-domain
//! source text only (its target side is machine-translated first). Both then:
//!
//! 1. prompt the language model with every in-domain target sentence, once per
//!    run seed (`generate`)
//! 2. split the generated text into sentences (`split_sentences`)
//! 3. drop duplicates, dash-only lines, file names and wrong-language lines
//!    (`clean`)
//! 4. back-translate what is left (`back_translate`)
//! 5. run the rule and semantic filters over the synthetic bitext
//!    (`rule_filter`, `semantic_filter`)
//! 6. sample generic data and build the oversampled mix (`sample_generic`,
//!    `mix`)
//!
//! Every stage writes its outputs under the output directory and marks itself
//! done in `pipeline.state.json`; a rerun with the same configuration skips
//! finished stages and resumes journaled service calls. The run ends with
//! `counts.json` and `pipeline.manifest.json`, which [`verify_output`]
//! checks.
//!
//! Seeds inside the individual sections are not used: run seeds, the generic
//! sample and the mix order all derive from the top-level `seed`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{
    back_translate, clean_generated, forward_translate, generate_corpus, split_sentences, AugmentPlan, GenRecord,
    JournalOptions, LangGuardConfig, DEFAULT_CHECKPOINT_EVERY,
};
use crate::corpus::{
    load_corpus, read_json, read_lines, write_json, write_lines, write_parallel, BitextPaths, Corpus, CreatedBy,
    LanguagePair, ManifestInfo, MonoCorpus, Provenance, SegmentPair,
};
use crate::error::{Error, Result};
use crate::filters::{apply_rules, semantic_filter, FilterReport, RuleConfig, SemanticConfig};
use crate::mixer::{build_mix, emit_training_files, sample_generic, MixManifest, MixPlan};
use crate::rng::mix64;
use crate::services::{GenerationParams, MockScript, ServiceEndpoint, ServiceSet, TranslationParams};

pub const STATE_FILE: &str = "pipeline.state.json";
pub const MANIFEST_FILE: &str = "pipeline.manifest.json";
pub const COUNTS_FILE: &str = "counts.json";
pub const CONFIG_SNAPSHOT: &str = "config.snapshot.json";

pub const GENERATE_URL_ENV: &str = "DOMAINSMITH_GENERATE_URL";
pub const TRANSLATE_URL_ENV: &str = "DOMAINSMITH_TRANSLATE_URL";
pub const EMBED_URL_ENV: &str = "DOMAINSMITH_EMBED_URL";

const SHARED_STAGES: [&str; 8] = [
    "generate",
    "split_sentences",
    "clean",
    "back_translate",
    "rule_filter",
    "semantic_filter",
    "sample_generic",
    "mix",
];

/// Stage names in execution order.
pub fn stage_names(setup: u8) -> Vec<&'static str> {
    let head = (setup == 2).then_some("forward_translate");
    head.into_iter().chain(SHARED_STAGES).collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServicesConfig {
    /// Mock script answering all three routes; takes precedence over URLs.
    pub mock: Option<PathBuf>,
    pub generate: Option<ServiceEndpoint>,
    pub translate: Option<ServiceEndpoint>,
    pub embed: Option<ServiceEndpoint>,
}

impl ServicesConfig {
    /// Builds the clients, letting the `DOMAINSMITH_*_URL` variables override
    /// configured base URLs.
    pub fn connect(&self) -> Result<ServiceSet> {
        if let Some(path) = &self.mock {
            let script = MockScript::load(path)?;
            return Ok(ServiceSet::mock(script, ServiceEndpoint::new("mock://"))?.0);
        }
        // A missing endpoint only fails once its route is called.
        let endpoint = |configured: &Option<ServiceEndpoint>, var: &str| {
            let mut ep = configured.clone().unwrap_or_default();
            if let Ok(url) = std::env::var(var) {
                ep.base_url = url;
            }
            ep
        };
        ServiceSet::http(
            endpoint(&self.generate, GENERATE_URL_ENV),
            endpoint(&self.translate, TRANSLATE_URL_ENV),
            endpoint(&self.embed, EMBED_URL_ENV),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Number of generation runs; ignored when `run_seeds` is given.
    pub runs: usize,
    pub run_seeds: Option<Vec<u64>>,
    pub checkpoint_every: usize,
    pub min_letter_fraction: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            runs: 2,
            run_seeds: None,
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
            min_letter_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// 1 or 2. May be left out and given on the command line instead.
    #[serde(default)]
    pub setup: Option<u8>,
    #[serde(default)]
    pub seed: u64,
    pub langs: LanguagePair,
    pub output_dir: PathBuf,
    pub generic: BitextPaths,
    /// Setup 1 input.
    #[serde(default)]
    pub in_domain: Option<BitextPaths>,
    /// Setup 2 input; falls back to the source side of `in_domain`.
    #[serde(default)]
    pub in_domain_source: Option<PathBuf>,
    #[serde(default)]
    pub services: ServicesConfig,
    #[serde(default)]
    pub rules: RuleConfig,
    #[serde(default)]
    pub semantic: SemanticConfig,
    #[serde(default)]
    pub generation: GenerationParams,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub translation: TranslationParams,
    #[serde(default)]
    pub mix: MixPlan,
}

impl PipelineConfig {
    pub fn new(langs: LanguagePair, generic: BitextPaths, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            setup: None,
            seed: 0,
            langs,
            output_dir: output_dir.into(),
            generic,
            in_domain: None,
            in_domain_source: None,
            services: ServicesConfig::default(),
            rules: RuleConfig::default(),
            semantic: SemanticConfig::default(),
            generation: GenerationParams::default(),
            augment: AugmentConfig::default(),
            translation: TranslationParams::default(),
            mix: MixPlan::default(),
        }
    }

    /// Parses TOML, or JSON when the file ends in `.json`. Relative paths are
    /// taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |message: String| Error::Config(format!("{}: {message}", path.display()));
        let mut cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.generic.source);
        fix(&mut self.generic.target);
        if let Some(b) = &mut self.in_domain {
            fix(&mut b.source);
            fix(&mut b.target);
        }
        if let Some(p) = &mut self.in_domain_source {
            fix(p);
        }
        if let Some(p) = &mut self.services.mock {
            fix(p);
        }
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        match &self.augment.run_seeds {
            Some(s) => s.clone(),
            None => (0..self.augment.runs).map(|r| mix64(self.seed, 0x100 + r as u64)).collect(),
        }
    }

    /// Checks the configuration and that every input file exists. Runs before
    /// any service is contacted.
    pub fn validate(&self, setup: u8) -> Result<()> {
        match setup {
            1 if self.in_domain.is_none() => {
                return Err(Error::Config("setup 1 needs an in-domain bitext (in_domain.source / in_domain.target)".into()))
            }
            2 if self.in_domain_source.is_none() && self.in_domain.is_none() => {
                return Err(Error::Config("setup 2 needs in-domain source text (in_domain_source)".into()))
            }
            1 | 2 => {}
            other => return Err(Error::Config(format!("setup must be 1 or 2, got {other}"))),
        }
        if self.run_seeds().is_empty() {
            return Err(Error::Config("at least one generation run is required".into()));
        }
        self.rules.validate()?;
        self.semantic.validate()?;
        self.generation.validate()?;
        self.translation.validate()?;
        self.mix.validate()?;
        let mut inputs = vec![&self.generic.source, &self.generic.target];
        match setup {
            1 => {
                let b = self.in_domain.as_ref().unwrap();
                inputs.extend([&b.source, &b.target]);
            }
            _ => inputs.push(self.setup2_source().unwrap()),
        }
        if let Some(m) = &self.services.mock {
            inputs.push(m);
        }
        for p in inputs {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    fn setup2_source(&self) -> Option<&PathBuf> {
        self.in_domain_source.as_ref().or(self.in_domain.as_ref().map(|b| &b.source))
    }

    /// The configuration as snapshotted into the output tree: output
    /// directory blanked so identical runs in different places match.
    fn snapshot(&self, setup: u8) -> Self {
        let mut c = self.clone();
        c.setup = Some(setup);
        c.output_dir = PathBuf::from(".");
        c
    }

    pub fn checksum(&self, setup: u8) -> Result<String> {
        let bytes = serde_json::to_vec(&self.snapshot(setup))?;
        Ok(format!("sha256:{}", hex::encode(Sha256::digest(bytes))))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineState {
    pub setup: u8,
    pub config_checksum: String,
    pub completed: Vec<String>,
}

/// Generation counts: sentences per run, their total and what survived
/// cleaning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationCounts {
    pub runs: Vec<usize>,
    pub total: usize,
    pub filtered: usize,
}

/// Back-translated pairs and what each filter kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackTranslationCounts {
    pub translated: usize,
    pub rule_based: usize,
    pub semantic: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsReport {
    pub setup: u8,
    pub language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward_translated: Option<usize>,
    pub generation: GenerationCounts,
    pub back_translation: BackTranslationCounts,
    pub in_domain_pool: usize,
    pub generic_sample: usize,
    pub mixed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub version: String,
    pub setup: u8,
    pub langs: LanguagePair,
    pub seed: u64,
    pub config_checksum: String,
    pub stages: Vec<StageRecord>,
    pub counts: CountsReport,
    pub mix: MixManifest,
    /// Relative path → sha256 of every file the stages wrote.
    pub files: BTreeMap<String, String>,
}

impl PipelineManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST_FILE))
    }

    pub fn stage_names(&self) -> Vec<&str> {
        self.stages.iter().map(|s| s.name.as_str()).collect()
    }
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    setup: u8,
    dir: PathBuf,
    services: &'a ServiceSet,
    state: PipelineState,
}

// Output locations, relative to the output directory.
const GEN_JOURNAL: &str = "generation/generated.genl";
const CLEAN_FILE: &str = "generation/filtered.txt";
const BT_JOURNAL: &str = "work/back_translate.journal";
const FT_JOURNAL: &str = "work/forward_translate.journal";

fn run_file(r: usize) -> String {
    format!("generation/sentences.run{}.txt", r + 1)
}

impl Run<'_> {
    fn langs(&self) -> &LanguagePair {
        &self.cfg.langs
    }

    fn bitext(&self, stem: &str) -> BitextPaths {
        BitextPaths::in_dir(&self.dir.join("corpora"), stem, self.langs())
    }

    fn rel_bitext(&self, stem: &str) -> Vec<String> {
        vec![
            format!("corpora/{stem}.{}", self.langs().source),
            format!("corpora/{stem}.{}", self.langs().target),
        ]
    }

    fn journal(&self, rel: &str) -> JournalOptions {
        JournalOptions {
            path: Some(self.dir.join(rel)),
            checkpoint_every: self.cfg.augment.checkpoint_every,
        }
    }

    fn load(&self, stem: &str, tag: Option<Provenance>) -> Result<Corpus> {
        load_corpus(&self.bitext(stem), stem, self.langs(), tag)
    }

    fn save(&self, stem: &str, pairs: &[SegmentPair], op: &str) -> Result<()> {
        let info = ManifestInfo::new(stem, self.langs().clone(), CreatedBy::new(op, serde_json::json!({})));
        write_parallel(pairs.iter().cloned().map(Ok), &self.bitext(stem), info)?;
        Ok(())
    }

    fn report(&self, name: &str) -> Result<FilterReport> {
        read_json(&self.dir.join("reports").join(FilterReport::file_name(name)))
    }

    fn done(&self, stage: &str) -> bool {
        self.state.completed.iter().any(|s| s == stage)
    }

    fn mark(&mut self, stage: &str) -> Result<()> {
        self.state.completed.push(stage.to_owned());
        write_json(&self.dir.join(STATE_FILE), &self.state)
    }

    fn stage(&mut self, name: &str, body: impl FnOnce(&Self) -> Result<()>) -> Result<()> {
        if self.done(name) {
            log::info!("stage {name}: already complete");
            return Ok(());
        }
        log::info!("stage {name}");
        body(self).map_err(|e| {
            e.context(format!(
                "stage {name} failed; finished stages are listed in {}",
                self.dir.join(STATE_FILE).display()
            ))
        })?;
        self.mark(name)
    }

    fn in_domain(&self) -> Result<Corpus> {
        match self.setup {
            1 => load_corpus(
                self.cfg.in_domain.as_ref().unwrap(),
                "in-domain",
                self.langs(),
                Some(Provenance::Authentic),
            ),
            _ => self.load("forward_translated", Some(Provenance::ForwardTranslated)),
        }
    }

    fn plan(&self) -> Result<AugmentPlan> {
        let prompts = self.in_domain()?.pairs.into_iter().map(|p| p.target).collect();
        Ok(AugmentPlan::new(
            prompts,
            self.cfg.run_seeds(),
            self.cfg.generation.clone(),
            self.langs().target.clone(),
        ))
    }

    fn execute(&mut self) -> Result<()> {
        let langs = self.langs().clone();
        let svc = self.services;

        if self.setup == 2 {
            self.stage("forward_translate", |r| {
                let src = r.cfg.setup2_source().unwrap();
                let mono = MonoCorpus::new(langs.source.clone(), read_lines(src)?);
                let ft = forward_translate(&mono, &svc.mt, &r.cfg.translation, &langs, &r.journal(FT_JOURNAL))?;
                r.save("forward_translated", &ft.pairs, "forward_translate")
            })?;
        }

        self.stage("generate", |r| {
            let plan = r.plan()?;
            generate_corpus(&plan, &svc.lm, &r.journal(GEN_JOURNAL))?;
            Ok(())
        })?;

        self.stage("split_sentences", |r| {
            let records: Vec<GenRecord> = crate::augment::recover_journal(&r.dir.join(GEN_JOURNAL))?
                .iter()
                .map(|l| serde_json::from_str(l).map_err(Error::from))
                .collect::<Result<_>>()?;
            for run in 0..r.cfg.run_seeds().len() {
                let sentences: Vec<String> = records
                    .iter()
                    .filter(|rec| rec.run == run)
                    .flat_map(|rec| rec.sequences.iter())
                    .flat_map(|text| split_sentences(text, &langs.target))
                    .collect();
                write_lines(sentences.iter().map(String::as_str), &r.dir.join(run_file(run)))?;
            }
            Ok(())
        })?;

        self.stage("clean", |r| {
            let mut all = Vec::new();
            for run in 0..r.cfg.run_seeds().len() {
                all.extend(read_lines(&r.dir.join(run_file(run)))?);
            }
            let guard = LangGuardConfig {
                expected: langs.target.clone(),
                min_letter_fraction: r.cfg.augment.min_letter_fraction,
            };
            let (kept, report) = clean_generated("clean", all, &guard)?;
            report.save(&r.dir.join("reports"))?;
            write_lines(kept.iter().map(String::as_str), &r.dir.join(CLEAN_FILE))?;
            Ok(())
        })?;

        self.stage("back_translate", |r| {
            let mono = MonoCorpus::new(langs.target.clone(), read_lines(&r.dir.join(CLEAN_FILE))?);
            let bt = back_translate(&mono, &svc.mt, &r.cfg.translation, &langs, &r.journal(BT_JOURNAL))?;
            r.save("back_translated", &bt.pairs, "back_translate")
        })?;

        self.stage("rule_filter", |r| {
            let bt = r.load("back_translated", Some(Provenance::BackTranslated))?;
            let (kept, report) = apply_rules("rule_filter", bt.pairs, &r.cfg.rules)?;
            report.save(&r.dir.join("reports"))?;
            r.save("synthetic.rules", &kept, "apply_rules")
        })?;

        self.stage("semantic_filter", |r| {
            let rules = r.load("synthetic.rules", Some(Provenance::BackTranslated))?;
            let out = semantic_filter("semantic_filter", rules.pairs, &r.cfg.semantic, &svc.embed)?;
            let reports = r.dir.join("reports");
            out.report.save(&reports)?;
            let mut chained = r.report("clean")?.chain(&r.report("rule_filter")?)?.chain(&out.report)?;
            chained.name = "synthetic".into();
            chained.save(&reports)?;
            r.save("synthetic", &out.kept, "semantic_filter")
        })?;

        self.stage("sample_generic", |r| {
            let mut pool = r.in_domain()?.pairs;
            pool.extend(r.load("synthetic", Some(Provenance::BackTranslated))?.pairs);
            r.save("in_domain_pool", &pool, "concat")?;
            let generic = load_corpus(&r.cfg.generic, "generic", &langs, Some(Provenance::Authentic))?;
            let want = pool.len() * r.cfg.mix.size_ratio;
            let sample = sample_generic(&generic.pairs, want, mix64(r.cfg.seed, 2))?;
            r.save("generic_sample", &sample, "sample_generic")
        })?;

        self.stage("mix", |r| {
            let pool = r.load("in_domain_pool", None)?;
            let generic = r.load("generic_sample", None)?;
            let plan = MixPlan {
                seed: mix64(r.cfg.seed, 1),
                ..r.cfg.mix.clone()
            };
            let stream = build_mix(&plan, &pool.pairs, &generic.pairs)?;
            let mix_dir = r.dir.join("mix");
            let paths = BitextPaths::in_dir(&mix_dir, "train", &langs);
            let mut manifest = emit_training_files(stream, &paths, &langs, plan.add_sequence_controls)?;
            manifest.source_path = PathBuf::from(format!("train.{}", langs.source));
            manifest.target_path = PathBuf::from(format!("train.{}", langs.target));
            manifest.save(&mix_dir)?;
            Ok(())
        })
    }

    fn stage_outputs(&self, stage: &str) -> Vec<String> {
        let report = |n: &str| format!("reports/{}", FilterReport::file_name(n));
        match stage {
            "forward_translate" => self.rel_bitext("forward_translated"),
            "generate" => vec![GEN_JOURNAL.into()],
            "split_sentences" => (0..self.cfg.run_seeds().len()).map(run_file).collect(),
            "clean" => vec![CLEAN_FILE.into(), report("clean")],
            "back_translate" => self.rel_bitext("back_translated"),
            "rule_filter" => [self.rel_bitext("synthetic.rules"), vec![report("rule_filter")]].concat(),
            "semantic_filter" => [
                self.rel_bitext("synthetic"),
                vec![report("semantic_filter"), report("synthetic")],
            ]
            .concat(),
            "sample_generic" => [self.rel_bitext("in_domain_pool"), self.rel_bitext("generic_sample")].concat(),
            "mix" => vec![
                format!("mix/train.{}", self.langs().source),
                format!("mix/train.{}", self.langs().target),
                format!("mix/{}", MixManifest::FILE_NAME),
            ],
            _ => Vec::new(),
        }
    }

    fn counts(&self, mix: &MixManifest) -> Result<CountsReport> {
        let runs = (0..self.cfg.run_seeds().len())
            .map(|r| crate::corpus::count_lines(&self.dir.join(run_file(r))))
            .collect::<Result<Vec<_>>>()?;
        let clean = self.report("clean")?;
        let rules = self.report("rule_filter")?;
        let semantic = self.report("semantic_filter")?;
        let forward_translated = match self.setup {
            2 => Some(crate::corpus::count_lines(&self.bitext("forward_translated").source)?),
            _ => None,
        };
        Ok(CountsReport {
            setup: self.setup,
            language: self.langs().target.clone(),
            forward_translated,
            generation: GenerationCounts {
                total: runs.iter().sum(),
                runs,
                filtered: clean.kept_count,
            },
            back_translation: BackTranslationCounts {
                translated: rules.input_count,
                rule_based: rules.kept_count,
                semantic: semantic.kept_count,
            },
            in_domain_pool: mix.in_domain_count,
            generic_sample: mix.generic_sample_count,
            mixed: mix.emitted_count,
        })
    }

    fn finish(&self) -> Result<PipelineManifest> {
        let mix: MixManifest = read_json(&self.dir.join("mix").join(MixManifest::FILE_NAME))?;
        let counts = self.counts(&mix)?;
        write_json(&self.dir.join(COUNTS_FILE), &counts)?;

        let stages: Vec<StageRecord> = stage_names(self.setup)
            .into_iter()
            .map(|s| StageRecord {
                name: s.to_owned(),
                outputs: self.stage_outputs(s),
            })
            .collect();
        let mut files = BTreeMap::new();
        let listed = stages.iter().flat_map(|s| s.outputs.iter().cloned());
        for rel in listed.chain([COUNTS_FILE.to_owned(), CONFIG_SNAPSHOT.to_owned()]) {
            files.insert(rel.clone(), file_sha256(&self.dir.join(&rel))?);
        }
        let manifest = PipelineManifest {
            version: crate::VERSION.to_owned(),
            setup: self.setup,
            langs: self.langs().clone(),
            seed: self.cfg.seed,
            config_checksum: self.state.config_checksum.clone(),
            stages,
            counts,
            mix,
            files,
        };
        write_json(&self.dir.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("sha256:{}", hex::encode(Sha256::digest(bytes))))
}

/// Runs one setup end to end, resuming from an earlier partial run of the same
/// configuration in the same output directory.
pub fn run_setup(cfg: &PipelineConfig, setup: u8, services: &ServiceSet) -> Result<PipelineManifest> {
    if let Some(s) = cfg.setup {
        if s != setup {
            return Err(Error::Usage(format!("configuration is for setup {s}, but setup {setup} was requested")));
        }
    }
    cfg.validate(setup)?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let checksum = cfg.checksum(setup)?;

    let state_path = dir.join(STATE_FILE);
    let state = if state_path.exists() {
        let s: PipelineState = read_json(&state_path)?;
        if s.config_checksum != checksum || s.setup != setup {
            return Err(Error::Config(format!(
                "{} holds a run with a different configuration; use a fresh output directory",
                dir.display()
            )));
        }
        s
    } else {
        PipelineState {
            setup,
            config_checksum: checksum,
            completed: Vec::new(),
        }
    };
    write_json(&dir.join(CONFIG_SNAPSHOT), &cfg.snapshot(setup))?;
    write_json(&state_path, &state)?;

    let mut run = Run {
        cfg,
        setup,
        dir,
        services,
        state,
    };
    run.execute()?;
    run.finish()
}

/// Setup 1: in-domain bitext available.
pub fn run_setup1(cfg: &PipelineConfig, services: &ServiceSet) -> Result<PipelineManifest> {
    run_setup(cfg, 1, services)
}

/// Setup 2: in-domain source text only; targets come from forward translation.
pub fn run_setup2(cfg: &PipelineConfig, services: &ServiceSet) -> Result<PipelineManifest> {
    run_setup(cfg, 2, services)
}

/// Lists everything wrong with a finished output directory: missing or altered
/// files, filter reports that do not conserve or chain, count tables that
/// disagree with the reports, an inconsistent mix manifest and a config
/// snapshot that does not match the recorded checksum.
pub fn check_output(dir: &Path) -> Result<Vec<String>> {
    let m = PipelineManifest::load(dir)?;
    let mut problems = Vec::new();

    for (rel, sum) in &m.files {
        match file_sha256(&dir.join(rel)) {
            Ok(actual) if &actual == sum => {}
            Ok(_) => problems.push(format!("{rel}: checksum mismatch")),
            Err(_) => problems.push(format!("{rel}: missing")),
        }
    }

    let expected: Vec<&str> = stage_names(m.setup);
    if m.stage_names() != expected {
        problems.push(format!("stage list {:?} differs from {:?}", m.stage_names(), expected));
    }

    let report = |n: &str| -> Result<FilterReport> { read_json(&dir.join("reports").join(FilterReport::file_name(n))) };
    let chain = ["clean", "rule_filter", "semantic_filter"]
        .into_iter()
        .map(report)
        .collect::<Result<Vec<_>>>()?;
    for r in &chain {
        if !r.is_conserved() {
            problems.push(format!("report {} does not conserve its input", r.name));
        }
    }
    if chain[0].kept_count != chain[1].input_count || chain[1].kept_count != chain[2].input_count {
        problems.push("filter reports do not chain".into());
    }
    let combined = report("synthetic")?;
    if combined.input_count != chain[0].input_count || combined.kept_count != chain[2].kept_count || !combined.is_conserved() {
        problems.push("combined synthetic report disagrees with its parts".into());
    }

    let c = &m.counts;
    if c.generation.total != c.generation.runs.iter().sum::<usize>()
        || c.generation.total != chain[0].input_count
        || c.generation.filtered != chain[0].kept_count
        || c.back_translation.translated != c.generation.filtered
        || c.back_translation.rule_based != chain[1].kept_count
        || c.back_translation.semantic != chain[2].kept_count
    {
        problems.push("counts.json disagrees with the filter reports".into());
    }
    let on_disk: CountsReport = read_json(&dir.join(COUNTS_FILE))?;
    if &on_disk != c {
        problems.push("counts.json differs from the manifest copy".into());
    }

    if !m.mix.is_consistent() {
        problems.push("mix manifest totals do not add up".into());
    }
    if m.mix.generic_sample_count != m.mix.in_domain_count * m.mix.size_ratio {
        problems.push("generic sample is not size_ratio times the in-domain pool".into());
    }

    let snapshot: PipelineConfig = read_json(&dir.join(CONFIG_SNAPSHOT))?;
    if snapshot.checksum(m.setup)? != m.config_checksum {
        problems.push("config snapshot does not match the recorded checksum".into());
    }
    Ok(problems)
}

/// [`check_output`] as a pass/fail.
pub fn verify_output(dir: &Path) -> Result<()> {
    let problems = check_output(dir)?;
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{}: {}", dir.display(), problems.join("; "))))
    }
}
