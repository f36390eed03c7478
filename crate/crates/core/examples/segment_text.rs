//! Unigram segmentation with a hand-written model, the round trip back to
//! text and a vocabulary export.
//!
//!     cargo run --example segment_text [-- MODEL.tsv]
//!
//! MODEL.tsv has one `piece<TAB>log-prob` row per line.

use domainsmith::subword::{desegment, vocab_lines, SubwordModel};

fn toy_model() -> domainsmith::Result<SubwordModel> {
    let mut rows: Vec<(String, f64)> = vec![
        ("▁".into(), -2.0),
        ("▁the".into(), -3.0),
        ("▁vaccin".into(), -6.0),
        ("ation".into(), -5.0),
        ("e".into(), -4.0),
        ("s".into(), -4.0),
        ("▁rate".into(), -6.5),
    ];
    rows.extend(('a'..='z').chain('0'..='9').filter(|c| !"es".contains(*c)).map(|c| (c.to_string(), -8.0)));
    rows.extend((0..=255u8).map(|b| (format!("<0x{b:02X}>"), -12.0)));
    SubwordModel::from_pieces(rows, true)
}

fn main() -> domainsmith::Result<()> {
    let model = match std::env::args().nth(1) {
        Some(path) => SubwordModel::load(path.as_ref())?,
        None => toy_model()?,
    };
    for text in ["the vaccination rate", "vaccines in 2021", "the rate é"] {
        let (pieces, logp) = model.segment_scored(text)?;
        println!("{text:?}");
        println!("  {} (log p = {logp:.2})", pieces.join(" "));
        assert_eq!(desegment(&pieces)?, text);
    }
    let vocab = vocab_lines(&model, &["<pad>", "<s>", "</s>", "<unk>"], true)?;
    println!("vocabulary: {} entries, first {:?}", vocab.len(), &vocab[..6]);
    Ok(())
}
