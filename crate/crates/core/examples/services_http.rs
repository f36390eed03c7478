//! Talks to the three service routes over real HTTP, using the bundled mock
//! server as the remote end. Point `DOMAINSMITH_TRANSLATE_URL` at a live
//! server to use that for translation instead.
//!
//!     cargo run --example services_http

use std::collections::BTreeMap;
use std::time::Duration;

use domainsmith::corpus::LanguagePair;
use domainsmith::services::{
    GenerationParams, MockScript, MockServer, ServiceEndpoint, ServiceSet, TranslationParams, TRANSLATE_ROUTE,
};

fn main() -> domainsmith::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let script = MockScript {
        // The first translate call answers 503 so the retry path shows up in the log.
        failures: BTreeMap::from([("translate".to_string(), 1)]),
        ..MockScript::default()
    };
    let server = MockServer::start(script)?;
    let local = ServiceEndpoint {
        retry_backoff: Duration::from_millis(50),
        ..ServiceEndpoint::new(server.url())
    };
    let translate = match std::env::var("DOMAINSMITH_TRANSLATE_URL") {
        Ok(url) => ServiceEndpoint::new(url),
        Err(_) => local.clone(),
    };
    let services = ServiceSet::http(local.clone(), translate, local)?;
    println!("mock server at {}", server.url());

    let params = GenerationParams {
        num_return_sequences: 2,
        ..GenerationParams::default()
    };
    for s in services.lm.generate("Hand hygiene prevents infection in hospitals.", &params)? {
        println!("generated: {s}");
    }

    let texts: Vec<String> = (1..=5).map(|i| format!("Sentence {i} about public health.")).collect();
    let batches = TranslationParams {
        beam_size: 5,
        batch_size: 2,
    };
    let out = services.mt.translate(&texts, &batches, &LanguagePair::new("en", "ar"))?;
    for (s, t) in texts.iter().zip(&out) {
        println!("{s} -> {t}");
    }
    println!("translate requests (incl. the failed one): {}", server.mock().calls_to(TRANSLATE_ROUTE).len());

    let emb = services.embed.embed(&texts[..2])?;
    println!("embedding dim {}, first values {:?}", emb.dim, &emb.vectors[0][..4]);
    Ok(())
}
