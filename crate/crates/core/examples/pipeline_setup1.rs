//! Runs Setup 1 on the toy corpus with scripted services and prints the counts.
//!
//!     cargo run --example pipeline_setup1 [-- OUT_DIR]

use std::path::Path;

use domainsmith::pipeline::{run_setup1, verify_output, PipelineConfig};

fn main() -> domainsmith::Result<()> {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy");
    let mut cfg = PipelineConfig::load(&toy.join("pipeline.toml"))?;
    cfg.output_dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("domainsmith-setup1"));

    let services = cfg.services.connect()?;
    let manifest = run_setup1(&cfg, &services)?;
    verify_output(&cfg.output_dir)?;

    println!("stages: {}", manifest.stage_names().join(" -> "));
    println!("{}", serde_json::to_string_pretty(&manifest.counts).unwrap());
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}
