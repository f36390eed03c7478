//! Mixed fine-tuning data: a seeded generic sample plus an interleaved
//! stream that oversamples the in-domain side.
//!
//! In block mode the stream repeats a fixed schedule, by default 9 in-domain
//! pairs followed by 1 generic pair. Each constituent is read in a seeded
//! random order and reshuffled whenever it runs out, which is what makes the
//! small in-domain side recur. The stream stops once the larger constituent
//! has been emitted `epochs` times its size.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{write_json, write_parallel, BitextPaths, CreatedBy, LanguagePair, ManifestInfo, SegmentPair};
use crate::error::{Error, Result};
use crate::rng::{mix64, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixMode {
    #[default]
    Block,
    Probabilistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixPlan {
    /// Generic sample size as a multiple of the in-domain size.
    pub size_ratio: usize,
    /// (in-domain, generic) sampling weights.
    pub weights: (f64, f64),
    pub mode: MixMode,
    pub seed: u64,
    pub epochs: usize,
    pub add_sequence_controls: bool,
    pub control_tokens: (String, String),
    /// Informational: handed to the external trainer via the manifest.
    pub recommended_finetune_steps: u64,
}

impl Default for MixPlan {
    fn default() -> Self {
        Self {
            size_ratio: 9,
            weights: (0.9, 0.1),
            mode: MixMode::Block,
            seed: 0,
            epochs: 1,
            add_sequence_controls: false,
            control_tokens: ("<s>".into(), "</s>".into()),
            recommended_finetune_steps: 5000,
        }
    }
}

impl MixPlan {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.weights;
        if !(a >= 0.0 && b >= 0.0) || ((a + b) - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("mix weights must be non-negative and sum to 1, got ({a}, {b})")));
        }
        if self.size_ratio == 0 || self.epochs == 0 {
            return Err(Error::Config("size_ratio and epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Smallest block `(p, q)` with `p + q <= 100` whose in-domain share
/// `p / (p + q)` is within 1e-9 of `w_in`.
pub fn block_for_weight(w_in: f64) -> Option<(usize, usize)> {
    (1..=100usize).find_map(|total| {
        (0..=total)
            .find(|&p| (p as f64 / total as f64 - w_in).abs() <= 1e-9)
            .map(|p| (p, total - p))
    })
}

/// Uniform seeded sample of `target_size` items without replacement, in
/// random order.
pub fn sample_generic<T: Clone>(pool: &[T], target_size: usize, seed: u64) -> Result<Vec<T>> {
    if pool.len() < target_size {
        return Err(Error::Size {
            what: "generic pool too small for the requested sample".into(),
            required: target_size,
            actual: pool.len(),
        });
    }
    let mut rng = SeededRng::new(seed);
    Ok(rng.sample_indices(pool.len(), target_size).into_iter().map(|i| pool[i].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constituent {
    InDomain,
    Generic,
}

impl Constituent {
    fn stream_tag(self) -> u64 {
        match self {
            Constituent::InDomain => 0x696e_646f_6d61_696e,
            Constituent::Generic => 0x6765_6e65_7269_6300,
        }
    }
}

/// Endless reader over one constituent, reshuffled at every cycle.
struct CyclingSource {
    len: usize,
    seed: u64,
    cycle: u64,
    order: Vec<usize>,
    pos: usize,
}

impl CyclingSource {
    fn new(len: usize, seed: u64) -> Self {
        let mut s = Self {
            len,
            seed,
            cycle: 0,
            order: Vec::new(),
            pos: 0,
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.order = (0..self.len).collect();
        SeededRng::new(mix64(self.seed, self.cycle)).shuffle(&mut self.order);
        self.pos = 0;
    }

    fn next_index(&mut self) -> usize {
        if self.pos == self.len {
            self.cycle += 1;
            self.reshuffle();
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Schedule {
    Block { in_domain: usize, generic: usize },
    Probabilistic { in_domain_weight: f64 },
}

/// The interleaved training stream. Yields pairs with the constituent they
/// came from.
pub struct MixStream<'a> {
    plan: MixPlan,
    in_domain: &'a [SegmentPair],
    generic: &'a [SegmentPair],
    schedule: Schedule,
    sources: [Option<CyclingSource>; 2],
    emitted: [usize; 2],
    stop: Option<(Constituent, usize)>,
    block_pos: usize,
    rng: SeededRng,
}

fn slot(c: Constituent) -> usize {
    match c {
        Constituent::InDomain => 0,
        Constituent::Generic => 1,
    }
}

/// Builds the mixed stream over an in-domain corpus and a generic sample.
pub fn build_mix<'a>(plan: &MixPlan, in_domain: &'a [SegmentPair], generic: &'a [SegmentPair]) -> Result<MixStream<'a>> {
    plan.validate()?;
    let (w_in, w_gen) = plan.weights;
    let schedule = match plan.mode {
        MixMode::Probabilistic => Schedule::Probabilistic { in_domain_weight: w_in },
        MixMode::Block => match block_for_weight(w_in) {
            Some((p, q)) => Schedule::Block { in_domain: p, generic: q },
            None => {
                log::warn!("weight {w_in} has no exact block of at most 100; falling back to probabilistic mixing");
                Schedule::Probabilistic { in_domain_weight: w_in }
            }
        },
    };
    let active = |w: f64, c: &[SegmentPair]| w > 0.0 && !c.is_empty();
    if in_domain.is_empty() && generic.is_empty() {
        log::warn!("both mix constituents are empty; the stream is empty");
    } else {
        for (w, c, what) in [(w_in, in_domain, "in-domain"), (w_gen, generic, "generic")] {
            if w > 0.0 && c.is_empty() {
                return Err(Error::Invalid(format!("{what} corpus is empty but has mix weight {w}")));
            }
        }
    }
    let stop = [(Constituent::InDomain, w_in, in_domain), (Constituent::Generic, w_gen, generic)]
        .into_iter()
        .filter(|(_, w, c)| active(*w, c))
        .max_by(|a, b| a.2.len().cmp(&b.2.len()).then(b.0.cmp(&a.0)))
        .map(|(c, _, corpus)| (c, corpus.len() * plan.epochs));
    let source = |c: Constituent, corpus: &[SegmentPair]| {
        (!corpus.is_empty()).then(|| CyclingSource::new(corpus.len(), plan.seed ^ c.stream_tag()))
    };
    Ok(MixStream {
        plan: plan.clone(),
        in_domain,
        generic,
        schedule,
        sources: [source(Constituent::InDomain, in_domain), source(Constituent::Generic, generic)],
        emitted: [0, 0],
        stop,
        block_pos: 0,
        rng: SeededRng::new(mix64(plan.seed, 0x70_726f_6261)),
    })
}

impl<'a> MixStream<'a> {
    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn plan(&self) -> &MixPlan {
        &self.plan
    }

    pub fn emitted(&self, c: Constituent) -> usize {
        self.emitted[slot(c)]
    }

    fn pick(&mut self) -> Constituent {
        match self.schedule {
            Schedule::Block { in_domain, generic } => {
                let c = if self.block_pos < in_domain {
                    Constituent::InDomain
                } else {
                    Constituent::Generic
                };
                self.block_pos = (self.block_pos + 1) % (in_domain + generic);
                c
            }
            Schedule::Probabilistic { in_domain_weight } => {
                if self.rng.unit_f64() < in_domain_weight {
                    Constituent::InDomain
                } else {
                    Constituent::Generic
                }
            }
        }
    }
}

impl<'a> Iterator for MixStream<'a> {
    type Item = (Constituent, &'a SegmentPair);

    fn next(&mut self) -> Option<Self::Item> {
        let (which, limit) = self.stop?;
        if self.emitted[slot(which)] >= limit {
            return None;
        }
        let c = self.pick();
        let idx = self.sources[slot(c)].as_mut().expect("picked constituents are non-empty").next_index();
        self.emitted[slot(c)] += 1;
        let corpus = match c {
            Constituent::InDomain => self.in_domain,
            Constituent::Generic => self.generic,
        };
        Some((c, &corpus[idx]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecipe {
    pub recommended_finetune_steps: u64,
    pub notes: Vec<String>,
}

impl TrainingRecipe {
    fn new(steps: u64) -> Self {
        Self {
            recommended_finetune_steps: steps,
            notes: vec![
                "some setups reach their best dev score after only 500 or 1000 fine-tuning steps".into(),
                "evaluate less frequently than usual and keep the intermediate checkpoints so the best one can be found".into(),
                "average the chosen fine-tuned checkpoint with the baseline to reduce variability between trainings".into(),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixManifest {
    pub in_domain_count: usize,
    pub generic_sample_count: usize,
    pub emitted_count: usize,
    /// Emitted pairs per constituent.
    pub constituents: BTreeMap<Constituent, usize>,
    /// Emitted pairs per segment origin.
    pub composition: BTreeMap<String, usize>,
    pub seed: u64,
    pub mode: MixMode,
    pub schedule: Schedule,
    pub size_ratio: usize,
    pub weights: (f64, f64),
    pub epochs: usize,
    pub add_sequence_controls: bool,
    pub checksum: String,
    pub source_path: PathBuf,
    pub target_path: PathBuf,
    pub training_recipe: TrainingRecipe,
}

impl MixManifest {
    pub const FILE_NAME: &'static str = "mix.manifest.json";

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(Self::FILE_NAME);
        write_json(&path, self)?;
        Ok(path)
    }

    /// emitted_count equals the per-origin and per-constituent totals.
    pub fn is_consistent(&self) -> bool {
        self.composition.values().sum::<usize>() == self.emitted_count
            && self.constituents.values().sum::<usize>() == self.emitted_count
    }
}

/// Writes the stream as line-aligned training files. With
/// `add_sequence_controls` every source line is wrapped in the plan's start
/// and end tokens.
pub fn emit_training_files(
    mut stream: MixStream<'_>,
    paths: &BitextPaths,
    langs: &LanguagePair,
    add_sequence_controls: bool,
) -> Result<MixManifest> {
    let plan = stream.plan.clone();
    let mut composition: BTreeMap<String, usize> = BTreeMap::new();
    let (open, close) = &plan.control_tokens;
    let pairs = std::iter::from_fn(|| stream.next()).map(|(_, p)| {
        *composition.entry(p.origin.clone()).or_insert(0) += 1;
        let mut p = p.clone();
        if add_sequence_controls {
            p.source = format!("{open} {} {close}", p.source);
        }
        Ok(p)
    });
    let written = write_parallel(
        pairs,
        paths,
        ManifestInfo::new("mix", langs.clone(), CreatedBy::new("emit_training_files", serde_json::json!({}))),
    )?;
    let constituents = [Constituent::InDomain, Constituent::Generic]
        .into_iter()
        .map(|c| (c, stream.emitted(c)))
        .collect();
    Ok(MixManifest {
        in_domain_count: stream.in_domain.len(),
        generic_sample_count: stream.generic.len(),
        emitted_count: written.segment_count,
        constituents,
        composition,
        seed: plan.seed,
        mode: plan.mode,
        schedule: stream.schedule,
        size_ratio: plan.size_ratio,
        weights: plan.weights,
        epochs: plan.epochs,
        add_sequence_controls,
        checksum: written.checksum,
        source_path: paths.source.clone(),
        target_path: paths.target.clone(),
        training_recipe: TrainingRecipe::new(plan.recommended_finetune_steps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(prefix: &str, n: usize) -> Vec<SegmentPair> {
        (0..n)
            .map(|i| SegmentPair::new(format!("{prefix}{i}"), format!("t{prefix}{i}"), prefix).unwrap())
            .collect()
    }

    #[test]
    fn block_mapping() {
        assert_eq!(block_for_weight(0.9), Some((9, 1)));
        assert_eq!(block_for_weight(1.0), Some((1, 0)));
        assert_eq!(block_for_weight(0.5), Some((1, 1)));
        assert_eq!(block_for_weight(0.75), Some((3, 1)));
        assert_eq!(block_for_weight(std::f64::consts::FRAC_1_SQRT_2), None);
    }

    #[test]
    fn generic_sampling() {
        let pool: Vec<usize> = (0..1000).collect();
        let a = sample_generic(&pool, 90, 3).unwrap();
        assert_eq!(a, sample_generic(&pool, 90, 3).unwrap());
        let mut uniq = a.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 90);
        assert!(sample_generic(&pool, 0, 3).unwrap().is_empty());
        assert!(sample_generic(&pool, 1001, 3).is_err());
        assert_eq!(9 * 239_931, 2_159_379);
    }

    #[test]
    fn default_block_composition() {
        let ind = corpus("i", 20);
        let gen = corpus("g", 180);
        let out: Vec<Constituent> = build_mix(&MixPlan::default(), &ind, &gen).unwrap().map(|(c, _)| c).collect();
        assert_eq!(out.len(), 1800);
        assert_eq!(out[..10].iter().filter(|&&c| c == Constituent::InDomain).count(), 9);
        assert_eq!(out[9], Constituent::Generic);
        assert_eq!(out[..100].iter().filter(|&&c| c == Constituent::InDomain).count(), 90);
    }

    #[test]
    fn degenerate_weight_is_all_in_domain() {
        let ind = corpus("i", 5);
        let plan = MixPlan {
            weights: (1.0, 0.0),
            ..MixPlan::default()
        };
        let out: Vec<_> = build_mix(&plan, &ind, &[]).unwrap().collect();
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|(c, _)| *c == Constituent::InDomain));
        assert_eq!(build_mix(&MixPlan::default(), &[], &[]).unwrap().count(), 0);
        assert!(build_mix(&MixPlan::default(), &ind, &[]).is_err());
    }

    #[test]
    fn small_in_domain_cycles_with_fresh_orders() {
        let ind = corpus("i", 3);
        let gen = corpus("g", 27);
        let seen: Vec<&str> = build_mix(&MixPlan::default(), &ind, &gen)
            .unwrap()
            .filter(|(c, _)| *c == Constituent::InDomain)
            .map(|(_, p)| p.source.as_str())
            .collect();
        let cycles: Vec<&[&str]> = seen.chunks(3).collect();
        for c in &cycles {
            let mut s = c.to_vec();
            s.sort();
            assert_eq!(s, vec!["i0", "i1", "i2"]);
        }
        assert!(cycles.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn controls_wrap_source() {
        let dir = tempfile::tempdir().unwrap();
        let ind = vec![SegmentPair::new("hello", "مرحبا", "i").unwrap()];
        let plan = MixPlan {
            weights: (1.0, 0.0),
            ..MixPlan::default()
        };
        let paths = BitextPaths::new(dir.path().join("a.src"), dir.path().join("a.tgt"));
        let langs = LanguagePair::new("en", "ar");
        let m = emit_training_files(build_mix(&plan, &ind, &[]).unwrap(), &paths, &langs, true).unwrap();
        assert_eq!(std::fs::read_to_string(&paths.source).unwrap(), "<s> hello </s>\n");
        assert_eq!(m.emitted_count, 1);
        assert!(m.is_consistent());
        emit_training_files(build_mix(&plan, &ind, &[]).unwrap(), &paths, &langs, false).unwrap();
        assert_eq!(std::fs::read_to_string(&paths.source).unwrap(), "hello\n");
    }
}
