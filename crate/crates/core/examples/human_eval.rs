//! A blind rating session. Candidates are shown as A, B, ... in a seeded
//! order per item; system names only reappear in the aggregate.
//!
//!     cargo run --example human_eval            # scripted answers
//!     cargo run --example human_eval -- --stdin # rate them yourself

use std::collections::BTreeMap;
use std::io::{BufRead, Cursor};

use domainsmith::corpus::SegmentPair;
use domainsmith::humeval::{aggregate, run_session, sample_eval_set, SessionConfig};

fn main() -> domainsmith::Result<()> {
    let test: Vec<SegmentPair> = [
        ("اغسل يديك", "Wash your hands"),
        ("ارتد كمامة", "Wear a mask"),
        ("ابق في المنزل", "Stay at home"),
        ("اتصل بالطبيب", "Call the doctor"),
    ]
    .iter()
    .map(|(s, t)| SegmentPair::new(*s, *t, "test"))
    .collect::<Result<_, _>>()?;
    let outputs = BTreeMap::from([
        ("baseline".to_string(), vec!["Wash hand".into(), "Wear mask".into(), "Stay in house".into(), "Call doctor".into()]),
        ("mixed-ft".to_string(), vec!["Wash your hands".into(), "Wear a mask".into(), "Stay at home".into(), "Call a doctor".into()]),
    ]);

    let items = sample_eval_set(&test, 3, 42)?;
    let ratings = std::env::temp_dir().join("domainsmith-ratings.jsonl");
    let _ = std::fs::remove_file(&ratings);
    let mut cfg = SessionConfig::new("rater-1", 42, &ratings);

    let mut input: Box<dyn BufRead> = if std::env::args().any(|a| a == "--stdin") {
        Box::new(std::io::stdin().lock())
    } else {
        Box::new(Cursor::new("4\n2\nseven\n4\n1\n4\n3\n"))
    };
    let outcome = run_session(&items, &outputs, &mut cfg, &mut input, &mut std::io::stdout())?;

    let report = aggregate(&outcome.records)?;
    println!();
    for (system, score) in &report.systems {
        println!("{system}: mean {:.2} = {:.1}% over {} ratings", score.mean, score.percentage, score.count);
    }
    Ok(())
}
