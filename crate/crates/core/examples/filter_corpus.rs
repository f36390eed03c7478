//! Rule-based then semantic filtering of a small noisy bitext.
//!
//!     cargo run --example filter_corpus

use domainsmith::corpus::SegmentPair;
use domainsmith::filters::{apply_rules, semantic_filter, RuleConfig, SemanticConfig};
use domainsmith::services::{MockScript, ServiceEndpoint, ServiceSet};

fn main() -> domainsmith::Result<()> {
    let raw = [
        ("Wash your hands often.", "Lavez-vous souvent les mains."),
        ("Wash your hands often.", "Lavez-vous souvent les mains."),
        ("<b>Stay home</b> if you feel sick.", "Restez chez vous si vous êtes malade."),
        ("COVID-19", "COVID-19"),
        ("Yes.", "Oui, bien sûr, nous avons reçu les résultats des tests de laboratoire hier soir."),
        ("Masks reduce transmission.", "Les masques réduisent la transmission."),
    ];
    let pairs: Vec<SegmentPair> = raw
        .iter()
        .enumerate()
        .map(|(i, (s, t))| SegmentPair::new(*s, *t, format!("line{}", i + 1)))
        .collect::<Result<_, _>>()?;

    let (kept, report) = apply_rules("rules", pairs, &RuleConfig::default())?;
    println!("rules: {} in, {} kept", report.input_count, report.kept_count);
    for (reason, n) in report.dropped.iter().filter(|(_, n)| **n > 0) {
        println!("  dropped {n} for {reason:?}");
    }

    // Hashing embeddings stand in for a real sentence encoder here, so the
    // similarities are arbitrary. A negative threshold keeps everything.
    let (services, _) = ServiceSet::mock(MockScript::default(), ServiceEndpoint::new("mock://"))?;
    let cfg = SemanticConfig {
        threshold: -1.0,
        log_similarities: true,
        ..SemanticConfig::default()
    };
    let out = semantic_filter("semantic", kept, &cfg, &services.embed)?;
    for (pair, sim) in out.kept.iter().zip(out.similarities.unwrap_or_default()) {
        println!("{sim:+.3}  {} ||| {}", pair.source, pair.target);
    }
    Ok(())
}
