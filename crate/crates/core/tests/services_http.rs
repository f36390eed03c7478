//! The typed clients against a real local HTTP server and the in-process mock.

use std::collections::BTreeMap;
use std::time::Duration;

use domainsmith::corpus::LanguagePair;
use domainsmith::services::{
    lm_generate, GenerateScript, GenerationParams, MockScript, MockServer, ServiceEndpoint, ServiceSet,
    TranslationParams, EMBED_ROUTE, GENERATE_ROUTE, TRANSLATE_ROUTE,
};
use domainsmith::Error;

fn endpoint(url: &str, retries: u32) -> ServiceEndpoint {
    ServiceEndpoint {
        max_retries: retries,
        retry_backoff: Duration::from_millis(1),
        timeout: Duration::from_secs(5),
        ..ServiceEndpoint::new(url)
    }
}

fn over_http(script: MockScript, retries: u32) -> (MockServer, ServiceSet) {
    let server = MockServer::start(script).unwrap();
    let ep = endpoint(server.url(), retries);
    let set = ServiceSet::http(ep.clone(), ep.clone(), ep).unwrap();
    (server, set)
}

fn texts(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("sentence number {i}")).collect()
}

fn ar_en() -> LanguagePair {
    LanguagePair::new("ar", "en")
}

#[test]
fn batches_and_beam_reach_the_server() {
    let (server, set) = over_http(MockScript::default(), 0);
    let params = TranslationParams {
        beam_size: 5,
        batch_size: 32,
    };
    let out = set.mt.translate(&texts(100), &params, &ar_en()).unwrap();
    assert_eq!(out.len(), 100);
    for (i, t) in out.iter().enumerate() {
        assert_eq!(t, &format!("[en] sentence number {i}"));
    }
    let calls = server.mock().calls_to(TRANSLATE_ROUTE);
    assert_eq!(calls.len(), 4);
    let mut sizes: Vec<usize> = calls.iter().map(|c| c.body["texts"].as_array().unwrap().len()).collect();
    sizes.sort();
    assert_eq!(sizes, vec![4, 32, 32, 32]);
    assert!(calls.iter().all(|c| c.body["beam_size"] == 5));
    assert!(calls.iter().all(|c| c.body["source_lang"] == "ar" && c.body["target_lang"] == "en"));

    assert!(set.mt.translate(&[], &params, &ar_en()).unwrap().is_empty());
    assert_eq!(server.mock().calls_to(TRANSLATE_ROUTE).len(), 4);
}

#[test]
fn jittered_completion_keeps_input_order() {
    let script = MockScript {
        delay_jitter_ms: 15,
        seed: 3,
        ..MockScript::echo()
    };
    let ep = ServiceEndpoint {
        max_in_flight: 8,
        ..endpoint("mock://", 0)
    };
    let (set, mock) = ServiceSet::mock(script, ep).unwrap();
    let input = texts(200);
    let params = TranslationParams {
        beam_size: 5,
        batch_size: 7,
    };
    let out = set.mt.translate(&input, &params, &ar_en()).unwrap();
    assert_eq!(out, input);

    // Every batch arrived exactly once, whatever the completion order.
    let mut firsts: Vec<String> = mock
        .calls_to(TRANSLATE_ROUTE)
        .iter()
        .map(|c| c.body["texts"][0].as_str().unwrap().to_owned())
        .collect();
    firsts.sort();
    let mut expected: Vec<String> = input.iter().step_by(7).cloned().collect();
    expected.sort();
    assert_eq!(firsts, expected);

    let vectors = set.embed.embed(&input).unwrap();
    assert_eq!(vectors.vectors.len(), 200);
    let single = set.embed.embed(&input[57..58]).unwrap();
    assert_eq!(vectors.vectors[57], single.vectors[0]);
}

#[test]
fn retry_budget_is_exact() {
    for retries in [0u32, 1, 3] {
        let ok = MockScript {
            failures: BTreeMap::from([("translate".to_string(), retries)]),
            ..MockScript::echo()
        };
        let (server, set) = over_http(ok, retries);
        let params = TranslationParams {
            beam_size: 5,
            batch_size: 10,
        };
        assert_eq!(set.mt.translate(&texts(3), &params, &ar_en()).unwrap(), texts(3));
        assert_eq!(server.mock().calls_to(TRANSLATE_ROUTE).len(), retries as usize + 1);

        let too_many = MockScript {
            failures: BTreeMap::from([("translate".to_string(), retries + 1)]),
            ..MockScript::echo()
        };
        let (server, set) = over_http(too_many, retries);
        match set.mt.translate(&texts(3), &params, &ar_en()) {
            Err(e @ Error::Service { .. }) => assert_eq!(e.exit_code(), 3),
            other => panic!("expected a service error, got {other:?}"),
        }
        assert_eq!(server.mock().calls_to(TRANSLATE_ROUTE).len(), retries as usize + 1);
    }
}

#[test]
fn short_generation_is_a_protocol_error() {
    let script = MockScript {
        generate: GenerateScript {
            responses: BTreeMap::from([("prompt".to_string(), vec!["a.".into(), "b.".into(), "c.".into()])]),
            ..GenerateScript::default()
        },
        ..MockScript::default()
    };
    let (server, set) = over_http(script, 2);
    let params = GenerationParams {
        num_return_sequences: 5,
        ..GenerationParams::default()
    };
    match lm_generate(&set.lm, "prompt", &params) {
        Err(e @ Error::Protocol { .. }) => assert_eq!(e.exit_code(), 3),
        other => panic!("expected a protocol error, got {other:?}"),
    }
    // Protocol errors are not retried.
    assert_eq!(server.mock().calls_to(GENERATE_ROUTE).len(), 1);

    let three = GenerationParams {
        num_return_sequences: 3,
        ..GenerationParams::default()
    };
    assert_eq!(set.lm.generate("prompt", &three).unwrap(), vec!["a.", "b.", "c."]);
    let body = &server.mock().calls_to(GENERATE_ROUTE)[1].body;
    assert_eq!(body["top_k"], 50);
    assert_eq!(body["top_p"], 0.95);
}

#[test]
fn unscripted_prompts_continue_deterministically() {
    let (_server, set) = over_http(MockScript::default(), 0);
    let params = GenerationParams {
        num_return_sequences: 4,
        seed: 9,
        ..GenerationParams::default()
    };
    let a = set.lm.generate("wash your hands with soap and water", &params).unwrap();
    let b = set.lm.generate("wash your hands with soap and water", &params).unwrap();
    assert_eq!(a.len(), 4);
    assert_eq!(a, b);
}

#[test]
fn unreachable_and_unconfigured_endpoints() {
    let dead = endpoint("http://127.0.0.1:9", 1);
    let set = ServiceSet::http(dead.clone(), dead.clone(), dead).unwrap();
    assert!(matches!(set.embed.embed(&texts(2)), Err(Error::Service { .. })));

    let none = endpoint("", 0);
    let set = ServiceSet::http(none.clone(), none.clone(), none).unwrap();
    match set.embed.embed(&texts(1)) {
        Err(e @ Error::Config(_)) => {
            assert!(e.to_string().contains(EMBED_ROUTE));
            assert_eq!(e.exit_code(), 1);
        }
        other => panic!("expected a config error, got {other:?}"),
    }
}
