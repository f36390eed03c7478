//! Samples a generic portion nine times the in-domain size and writes a
//! block-interleaved training set (nine in-domain pairs, then one generic).
//!
//!     cargo run --example mix_dataset [-- OUT_DIR]

use std::path::{Path, PathBuf};

use domainsmith::corpus::{load_corpus, BitextPaths, LanguagePair};
use domainsmith::mixer::{build_mix, emit_training_files, sample_generic, MixPlan};

fn main() -> domainsmith::Result<()> {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy");
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("domainsmith-mix"));
    let langs = LanguagePair::new("ar", "en");

    let in_domain = load_corpus(&BitextPaths::new(toy.join("in_domain.ar"), toy.join("in_domain.en")), "in_domain", &langs, None)?;
    let generic = load_corpus(&BitextPaths::new(toy.join("generic.ar"), toy.join("generic.en")), "generic", &langs, None)?;

    let plan = MixPlan {
        seed: 7,
        add_sequence_controls: true,
        ..MixPlan::default()
    };
    let sample = sample_generic(&generic.pairs, in_domain.len() * plan.size_ratio, plan.seed)?;
    let stream = build_mix(&plan, &in_domain.pairs, &sample)?;
    let paths = BitextPaths::in_dir(&out, "train", &langs);
    let manifest = emit_training_files(stream, &paths, &langs, plan.add_sequence_controls)?;
    manifest.save(&out)?;

    println!("in-domain {} + generic sample {}", manifest.in_domain_count, manifest.generic_sample_count);
    println!("emitted {} pairs: {:?}", manifest.emitted_count, manifest.constituents);
    println!("first lines of {}:", paths.source.display());
    for line in std::fs::read_to_string(&paths.source).unwrap_or_default().lines().take(11) {
        println!("  {line}");
    }
    Ok(())
}
