//! Scripted in-process stand-ins for the three services.
//!
//! A script maps request keys (the prompt, the text to translate, the text to
//! embed) to canned answers; unscripted requests fall back to deterministic
//! generators. Failure injection makes the first N calls of a route fail
//! transiently.
//!
//! ```json
//! {
//!   "generate":  {"responses": {"prompt": ["seq", "..."]}, "fallback": "continuation"},
//!   "translate": {"responses": {"text": "translation"}, "fallback": "tag"},
//!   "embed":     {"responses": {"text": [0.1, 0.2]}, "dim": 64},
//!   "failures":  {"generate": 0, "translate": 0, "embed": 0},
//!   "delay_jitter_ms": 0,
//!   "seed": 0
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    CallError, EmbedRequest, EmbedResponse, GenerateRequest, GenerateResponse, TranslateRequest,
    TranslateResponse, Transport, EMBED_ROUTE, GENERATE_ROUTE, TRANSLATE_ROUTE,
};
use crate::error::{Error, Result};
use crate::rng::{mix64, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerateFallback {
    /// Recombines the prompt's words into short sentences.
    #[default]
    Continuation,
    /// Unscripted prompts are rejected.
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslateFallback {
    /// Returns the input unchanged.
    Echo,
    /// Prefixes `[<target_lang>] `.
    #[default]
    Tag,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateScript {
    pub responses: BTreeMap<String, Vec<String>>,
    pub fallback: GenerateFallback,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslateScript {
    pub responses: BTreeMap<String, String>,
    pub fallback: TranslateFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedScript {
    pub responses: BTreeMap<String, Vec<f64>>,
    pub dim: usize,
}

impl Default for EmbedScript {
    fn default() -> Self {
        Self {
            responses: BTreeMap::new(),
            dim: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MockScript {
    pub generate: GenerateScript,
    pub translate: TranslateScript,
    pub embed: EmbedScript,
    /// Route name (`generate`, `translate`, `embed`) → number of leading calls that fail.
    pub failures: BTreeMap<String, u32>,
    /// Upper bound of a random per-call sleep, to shuffle completion order.
    pub delay_jitter_ms: u64,
    pub seed: u64,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self> {
        crate::corpus::read_json(path)
    }

    /// Pure echo translation and hashing embeddings.
    pub fn echo() -> Self {
        Self {
            translate: TranslateScript {
                fallback: TranslateFallback::Echo,
                ..TranslateScript::default()
            },
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub route: String,
    pub body: serde_json::Value,
    pub failed: bool,
}

pub struct MockTransport {
    script: MockScript,
    calls: Mutex<Vec<CallRecord>>,
    route_counts: Mutex<BTreeMap<String, u32>>,
    call_counter: AtomicU64,
}

fn route_name(route: &str) -> &str {
    route.rsplit('/').next().unwrap_or(route)
}

/// FNV-1a, 64 bit.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Bag of lower-cased character trigrams hashed into `dim` buckets, L2-normalised.
pub fn hash_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim.max(1)];
    let padded: Vec<char> = format!(" {} ", text.to_lowercase()).chars().collect();
    for w in padded.windows(3) {
        let gram: String = w.iter().collect();
        let bucket = (fnv1a(gram.as_bytes()) % v.len() as u64) as usize;
        v[bucket] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn continuation(prompt: &str, seed: u64, count: u32) -> Vec<String> {
    let words: Vec<&str> = prompt
        .split_whitespace()
        .map(|w| w.trim_end_matches(['.', '!', '?', '؟', '…', ',']))
        .filter(|w| !w.is_empty())
        .collect();
    (0..count)
        .map(|j| {
            let mut rng = SeededRng::new(mix64(mix64(seed, fnv1a(prompt.as_bytes())), j as u64));
            if words.is_empty() {
                return String::new();
            }
            let shift = rng.below(words.len() as u64) as usize;
            let mut first: Vec<&str> = words[shift..].iter().chain(&words[..shift]).copied().collect();
            first.truncate(12);
            let second: Vec<&str> = words.iter().copied().filter(|_| rng.below(10) < 7).collect();
            let mut text = format!("{}.", first.join(" "));
            if !second.is_empty() {
                text.push(' ');
                text.push_str(&second.join(" "));
                text.push('.');
            }
            match rng.below(20) {
                0 => text.push_str("\n-----"),
                1 => text.push_str(&format!("\nattachment_{}.pdf", rng.below(100))),
                _ => {}
            }
            text
        })
        .collect()
}

impl MockTransport {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            calls: Mutex::new(Vec::new()),
            route_counts: Mutex::new(BTreeMap::new()),
            call_counter: AtomicU64::new(0),
        }
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    /// Every call received so far, in arrival order.
    pub fn calls(&self) -> Vec<CallRecord> {
        self.calls.lock().unwrap().clone()
    }

    pub fn calls_to(&self, route: &str) -> Vec<CallRecord> {
        self.calls().into_iter().filter(|c| c.route == route).collect()
    }

    fn should_fail(&self, route: &str) -> bool {
        let budget = self.script.failures.get(route_name(route)).copied().unwrap_or(0);
        let mut counts = self.route_counts.lock().unwrap();
        let seen = counts.entry(route.to_owned()).or_insert(0);
        *seen += 1;
        *seen <= budget
    }

    fn answer(&self, route: &str, body: &serde_json::Value) -> std::result::Result<serde_json::Value, CallError> {
        let bad = |e: serde_json::Error| CallError::Rejected(format!("malformed request: {e}"));
        match route {
            GENERATE_ROUTE => {
                let req: GenerateRequest = serde_json::from_value(body.clone()).map_err(bad)?;
                let sequences = match self.script.generate.responses.get(&req.prompt) {
                    Some(seqs) => seqs.clone(),
                    None => match self.script.generate.fallback {
                        GenerateFallback::Continuation => {
                            continuation(&req.prompt, req.seed, req.num_return_sequences)
                        }
                        GenerateFallback::Reject => {
                            return Err(CallError::Rejected(format!("unscripted prompt {:?}", req.prompt)))
                        }
                    },
                };
                Ok(serde_json::to_value(GenerateResponse { sequences }).unwrap())
            }
            TRANSLATE_ROUTE => {
                let req: TranslateRequest = serde_json::from_value(body.clone()).map_err(bad)?;
                let mut translations = Vec::with_capacity(req.texts.len());
                for text in &req.texts {
                    let out = match self.script.translate.responses.get(text) {
                        Some(t) => t.clone(),
                        None => match self.script.translate.fallback {
                            TranslateFallback::Echo => text.clone(),
                            TranslateFallback::Tag => format!("[{}] {}", req.target_lang, text),
                            TranslateFallback::Reject => {
                                return Err(CallError::Rejected(format!("unscripted text {text:?}")))
                            }
                        },
                    };
                    translations.push(out);
                }
                Ok(serde_json::to_value(TranslateResponse { translations }).unwrap())
            }
            EMBED_ROUTE => {
                let req: EmbedRequest = serde_json::from_value(body.clone()).map_err(bad)?;
                let vectors: Vec<Vec<f64>> = req
                    .texts
                    .iter()
                    .map(|t| match self.script.embed.responses.get(t) {
                        Some(v) => v.clone(),
                        None => hash_embedding(t, self.script.embed.dim),
                    })
                    .collect();
                let dim = vectors.first().map(Vec::len).unwrap_or(self.script.embed.dim);
                Ok(serde_json::to_value(EmbedResponse { dim, vectors }).unwrap())
            }
            other => Err(CallError::Rejected(format!("unknown route {other}"))),
        }
    }
}

impl Transport for MockTransport {
    fn post(&self, route: &str, body: &serde_json::Value) -> std::result::Result<serde_json::Value, CallError> {
        let n = self.call_counter.fetch_add(1, Ordering::Relaxed);
        if self.script.delay_jitter_ms > 0 {
            let ms = mix64(self.script.seed, n) % (self.script.delay_jitter_ms + 1);
            std::thread::sleep(Duration::from_millis(ms));
        }
        let failed = self.should_fail(route);
        self.calls.lock().unwrap().push(CallRecord {
            route: route.to_owned(),
            body: body.clone(),
            failed,
        });
        if failed {
            return Err(CallError::Transient(format!("injected failure on {route}")));
        }
        self.answer(route, body)
    }

    fn describe(&self) -> String {
        format!("mock:hash-trigram-{}", self.script.embed.dim)
    }
}

impl std::str::FromStr for MockScript {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
