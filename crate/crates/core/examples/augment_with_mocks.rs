//! The augmentation loop against scripted services: prompt the language
//! model with in-domain targets, split and clean what comes back, then
//! back-translate it into synthetic pairs.
//!
//!     cargo run --example augment_with_mocks

use domainsmith::augment::{
    back_translate, clean_generated, generate_corpus, raw_texts, split_sentences, AugmentPlan, JournalOptions,
    LangGuardConfig,
};
use domainsmith::corpus::{LanguagePair, MonoCorpus};
use domainsmith::services::{GenerationParams, MockScript, ServiceEndpoint, ServiceSet, TranslationParams};

fn main() -> domainsmith::Result<()> {
    let langs = LanguagePair::new("ar", "en");
    let prompts = vec![
        "Wash your hands with soap and water for at least twenty seconds.".to_string(),
        "Vaccines are safe and effective at preventing severe illness.".to_string(),
        "Keep a distance of two metres from other people in public places.".to_string(),
    ];

    // Unscripted prompts get a deterministic word-shuffle continuation and
    // translations come back tagged with the target language.
    let (services, mock) = ServiceSet::mock(MockScript::default(), ServiceEndpoint::new("mock://"))?;

    let params = GenerationParams {
        num_return_sequences: 3,
        max_new_tokens: 60,
        ..GenerationParams::default()
    };
    let plan = AugmentPlan::new(prompts, vec![11, 12], params, "en");
    let records = generate_corpus(&plan, &services.lm, &JournalOptions::default())?;
    let sentences: Vec<String> = raw_texts(&plan, &records)
        .iter()
        .flat_map(|t| split_sentences(t, "en"))
        .collect();
    let (clean, report) = clean_generated("clean", sentences, &LangGuardConfig::new("en"))?;
    println!("{} raw sentences, {} after cleaning", report.input_count, clean.len());

    let bt = back_translate(
        &MonoCorpus::new("en", clean),
        &services.mt,
        &TranslationParams::default(),
        &langs,
        &JournalOptions::default(),
    )?;
    for pair in bt.pairs.iter().take(5) {
        println!("{}\n  <- {}", pair.target, pair.source);
    }
    println!("{} synthetic pairs from {} service calls", bt.len(), mock.calls().len());
    Ok(())
}
