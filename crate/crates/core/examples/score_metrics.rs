//! Corpus BLEU, chrF++ and TER on the bundled 100-segment test set.
//!
//!     cargo run --example score_metrics [-- HYP REF]

use std::path::{Path, PathBuf};

use domainsmith::corpus::read_lines;
use domainsmith::metrics::{bleu, chrfpp, sentence_chrfpp, ter, Smoothing, TerConfig, Tokenize};

fn main() -> domainsmith::Result<()> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/metrics");
    let mut args = std::env::args().skip(1).map(PathBuf::from);
    let hyp = args.next().unwrap_or_else(|| fixture.join("hyp.txt"));
    let reference = args.next().unwrap_or_else(|| fixture.join("ref.txt"));
    let h = read_lines(&hyp)?;
    let r = read_lines(&reference)?;

    let reports = [
        bleu(&h, &r, Tokenize::ThirteenA, Smoothing::Exponential)?,
        chrfpp(&h, &r)?,
        ter(&h, &r, &TerConfig::default())?,
    ];
    for report in &reports {
        println!("{}", report.summary_line());
    }

    let mut worst: Vec<(f64, usize)> = h.iter().zip(&r).map(|(a, b)| sentence_chrfpp(a, b)).zip(0..).collect();
    worst.sort_by(|a, b| a.0.total_cmp(&b.0));
    println!("\nlowest segment chrF++:");
    for (score, i) in worst.iter().take(3) {
        println!("{score:6.2}  hyp: {}\n        ref: {}", h[*i], r[*i]);
    }
    Ok(())
}
