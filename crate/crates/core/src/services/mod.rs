//! Clients for the external generation, translation and embedding services.
//!
//! All three speak one small JSON-over-HTTP protocol:
//!
//! | route            | request                                                                 | response                         |
//! |------------------|-------------------------------------------------------------------------|----------------------------------|
//! | `/v1/generate`   | `{prompt, top_k, top_p, max_new_tokens, num_return_sequences, seed}`    | `{sequences: [str]}`             |
//! | `/v1/translate`  | `{texts: [str], source_lang, target_lang, beam_size}`                   | `{translations: [str]}`          |
//! | `/v1/embed`      | `{texts: [str]}`                                                        | `{dim: int, vectors: [[float]]}` |
//!
//! A [`Transport`] carries request bodies to a service; [`HttpTransport`] does
//! it over the network and [`MockTransport`] answers in-process from a
//! [`MockScript`]. Retries, schema checks, batching and order restoration live
//! in the clients, so mocks exercise exactly the same code paths.

mod http;
mod mock;
mod server;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::LanguagePair;
use crate::error::{Error, Result};

pub use http::HttpTransport;
pub use mock::{
    hash_embedding, CallRecord, EmbedScript, GenerateFallback, GenerateScript, MockScript,
    MockTransport, TranslateFallback, TranslateScript,
};
pub use server::MockServer;

pub const GENERATE_ROUTE: &str = "/v1/generate";
pub const TRANSLATE_ROUTE: &str = "/v1/translate";
pub const EMBED_ROUTE: &str = "/v1/embed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub top_k: u32,
    pub top_p: f64,
    pub max_new_tokens: u32,
    pub num_return_sequences: u32,
    pub seed: u64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            top_k: 50,
            top_p: 0.95,
            max_new_tokens: 300,
            num_return_sequences: 5,
            seed: 0,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 || self.max_new_tokens == 0 || self.num_return_sequences == 0 {
            return Err(Error::Config(
                "top_k, max_new_tokens and num_return_sequences must be positive".into(),
            ));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config(format!("top_p must lie in (0, 1], got {}", self.top_p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslationParams {
    pub beam_size: u32,
    pub batch_size: usize,
}

impl Default for TranslationParams {
    fn default() -> Self {
        Self {
            beam_size: 5,
            batch_size: 32,
        }
    }
}

impl TranslationParams {
    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 || self.batch_size == 0 {
            return Err(Error::Config("beam_size and batch_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceEndpoint {
    pub base_url: String,
    #[serde(with = "secs")]
    pub timeout: Duration,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// First retry delay; doubles on every further attempt.
    #[serde(with = "secs")]
    pub retry_backoff: Duration,
}

impl Default for ServiceEndpoint {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            timeout: Duration::from_secs(120),
            max_retries: 3,
            max_in_flight: 4,
            retry_backoff: Duration::from_millis(500),
        }
    }
}

impl ServiceEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be at least 1".into()));
        }
        Ok(())
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// Failure of a single attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallError {
    /// Connection problems, timeouts, 5xx/429: worth retrying.
    Transient(String),
    /// Any other non-2xx answer or an unreadable body.
    Rejected(String),
}

pub trait Transport: Send + Sync {
    fn post(&self, route: &str, body: &serde_json::Value) -> std::result::Result<serde_json::Value, CallError>;

    /// Human-readable identity recorded in reports.
    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub top_k: u32,
    pub top_p: f64,
    pub max_new_tokens: u32,
    pub num_return_sequences: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateResponse {
    pub sequences: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslateRequest {
    pub texts: Vec<String>,
    pub source_lang: String,
    pub target_lang: String,
    pub beam_size: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslateResponse {
    pub translations: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedResponse {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

/// Retrying JSON caller shared by the three typed clients.
#[derive(Clone)]
pub struct ServiceClient {
    endpoint: ServiceEndpoint,
    transport: Arc<dyn Transport>,
}

impl ServiceClient {
    pub fn new(endpoint: ServiceEndpoint, transport: Arc<dyn Transport>) -> Result<Self> {
        endpoint.validate()?;
        Ok(Self { endpoint, transport })
    }

    pub fn http(endpoint: ServiceEndpoint) -> Result<Self> {
        let transport = HttpTransport::new(&endpoint.base_url, endpoint.timeout)?;
        Self::new(endpoint, Arc::new(transport))
    }

    pub fn endpoint(&self) -> &ServiceEndpoint {
        &self.endpoint
    }

    pub fn describe(&self) -> String {
        self.transport.describe()
    }

    pub fn call<Req: Serialize, Resp: DeserializeOwned>(&self, route: &str, request: &Req) -> Result<Resp> {
        if self.endpoint.base_url.is_empty() {
            return Err(Error::Config(format!("no endpoint configured for {route}")));
        }
        let body = serde_json::to_value(request)?;
        let mut attempt = 0u32;
        loop {
            match self.transport.post(route, &body) {
                Ok(value) => {
                    return serde_json::from_value(value).map_err(|e| Error::Protocol {
                        route: route.into(),
                        message: format!("response does not match schema: {e}"),
                    })
                }
                Err(CallError::Rejected(message)) => {
                    return Err(Error::Protocol {
                        route: route.into(),
                        message,
                    })
                }
                Err(CallError::Transient(message)) => {
                    if attempt >= self.endpoint.max_retries {
                        return Err(Error::Service {
                            route: route.into(),
                            message: format!("giving up after {} attempts: {message}", attempt + 1),
                        });
                    }
                    let delay = self.endpoint.retry_backoff.saturating_mul(1u32 << attempt.min(16));
                    log::warn!("{route}: attempt {} failed ({message}); retrying in {delay:?}", attempt + 1);
                    if !delay.is_zero() {
                        std::thread::sleep(delay);
                    }
                    attempt += 1;
                }
            }
        }
    }
}

/// Text-generation client.
#[derive(Clone)]
pub struct LmClient(pub ServiceClient);

/// Translation client.
#[derive(Clone)]
pub struct MtClient(pub ServiceClient);

/// Sentence-embedding client.
#[derive(Clone)]
pub struct EmbedClient(pub ServiceClient);

impl LmClient {
    pub fn max_in_flight(&self) -> usize {
        self.0.endpoint.max_in_flight
    }

    pub fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<Vec<String>> {
        lm_generate(self, prompt, params)
    }
}

impl MtClient {
    pub fn max_in_flight(&self) -> usize {
        self.0.endpoint.max_in_flight
    }

    pub fn translate(&self, texts: &[String], params: &TranslationParams, direction: &LanguagePair) -> Result<Vec<String>> {
        mt_translate(self, texts, params, direction)
    }
}

impl EmbedClient {
    pub fn max_in_flight(&self) -> usize {
        self.0.endpoint.max_in_flight
    }

    pub fn model_id(&self) -> String {
        self.0.describe()
    }

    pub fn embed(&self, texts: &[String]) -> Result<EmbedResponse> {
        embed(self, texts)
    }
}

/// The three clients a pipeline needs.
#[derive(Clone)]
pub struct ServiceSet {
    pub lm: LmClient,
    pub mt: MtClient,
    pub embed: EmbedClient,
}

impl ServiceSet {
    /// All three routes answered by one in-process mock.
    pub fn mock(script: MockScript, endpoint: ServiceEndpoint) -> Result<(Self, Arc<MockTransport>)> {
        let mock = Arc::new(MockTransport::new(script));
        let transport: Arc<dyn Transport> = mock.clone();
        let client = ServiceClient::new(endpoint, transport)?;
        Ok((
            Self {
                lm: LmClient(client.clone()),
                mt: MtClient(client.clone()),
                embed: EmbedClient(client),
            },
            mock,
        ))
    }

    pub fn http(generate: ServiceEndpoint, translate: ServiceEndpoint, embed: ServiceEndpoint) -> Result<Self> {
        Ok(Self {
            lm: LmClient(ServiceClient::http(generate)?),
            mt: MtClient(ServiceClient::http(translate)?),
            embed: EmbedClient(ServiceClient::http(embed)?),
        })
    }
}

/// Asks for `num_return_sequences` continuations of `prompt`.
pub fn lm_generate(client: &LmClient, prompt: &str, params: &GenerationParams) -> Result<Vec<String>> {
    params.validate()?;
    let request = GenerateRequest {
        prompt: prompt.to_owned(),
        top_k: params.top_k,
        top_p: params.top_p,
        max_new_tokens: params.max_new_tokens,
        num_return_sequences: params.num_return_sequences,
        seed: params.seed,
    };
    let response: GenerateResponse = client.0.call(GENERATE_ROUTE, &request)?;
    if response.sequences.len() != params.num_return_sequences as usize {
        return Err(Error::Protocol {
            route: GENERATE_ROUTE.into(),
            message: format!(
                "server returned {} sequences, {} were requested",
                response.sequences.len(),
                params.num_return_sequences
            ),
        });
    }
    Ok(response.sequences)
}

/// Translates `texts` in `direction`, batching by `params.batch_size` with up
/// to `max_in_flight` concurrent requests. Output order equals input order.
pub fn mt_translate(
    client: &MtClient,
    texts: &[String],
    params: &TranslationParams,
    direction: &LanguagePair,
) -> Result<Vec<String>> {
    params.validate()?;
    let batches: Vec<&[String]> = texts.chunks(params.batch_size).collect();
    let translated = fan_out(batches.len(), client.max_in_flight(), |i| {
        let batch = batches[i];
        let request = TranslateRequest {
            texts: batch.to_vec(),
            source_lang: direction.source.clone(),
            target_lang: direction.target.clone(),
            beam_size: params.beam_size,
        };
        let response: TranslateResponse = client.0.call(TRANSLATE_ROUTE, &request)?;
        if response.translations.len() != batch.len() {
            return Err(Error::Protocol {
                route: TRANSLATE_ROUTE.into(),
                message: format!(
                    "server returned {} translations for {} inputs",
                    response.translations.len(),
                    batch.len()
                ),
            });
        }
        Ok(response.translations)
    })?;
    Ok(translated.into_iter().flatten().collect())
}

/// One vector per text; every vector must have the reported dimension.
pub fn embed(client: &EmbedClient, texts: &[String]) -> Result<EmbedResponse> {
    if texts.is_empty() {
        return Ok(EmbedResponse {
            dim: 0,
            vectors: Vec::new(),
        });
    }
    let response: EmbedResponse = client.0.call(
        EMBED_ROUTE,
        &EmbedRequest {
            texts: texts.to_vec(),
        },
    )?;
    let protocol = |message: String| Error::Protocol {
        route: EMBED_ROUTE.into(),
        message,
    };
    if response.vectors.len() != texts.len() {
        return Err(protocol(format!(
            "server returned {} vectors for {} texts",
            response.vectors.len(),
            texts.len()
        )));
    }
    if let Some((i, v)) = response.vectors.iter().enumerate().find(|(_, v)| v.len() != response.dim) {
        return Err(protocol(format!(
            "vector {i} has dimension {} but the response declares {}",
            v.len(),
            response.dim
        )));
    }
    Ok(response)
}

/// Runs `task(0..n)` on up to `max_in_flight` threads and returns results in
/// index order. After the first failure no new tasks start; the error with the
/// lowest index is returned.
pub fn fan_out<T, F>(n: usize, max_in_flight: usize, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let workers = max_in_flight.max(1).min(n);
    if workers <= 1 {
        return (0..n).map(&task).collect();
    }
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = task(i);
                if out.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                slots.lock().unwrap()[i] = Some(out);
            });
        }
    });
    let slots = slots.into_inner().unwrap();
    let mut results = Vec::with_capacity(n);
    for slot in slots {
        match slot {
            Some(Ok(v)) => results.push(v),
            Some(Err(e)) => return Err(e),
            None => {
                return Err(Error::Invalid(
                    "task skipped after an earlier failure".into(),
                ))
            }
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_decoding_configuration() {
        let g = GenerationParams::default();
        assert_eq!((g.top_k, g.top_p, g.max_new_tokens, g.num_return_sequences), (50, 0.95, 300, 5));
        assert_eq!(TranslationParams::default().beam_size, 5);
    }

    #[test]
    fn invalid_params_rejected() {
        let g = GenerationParams {
            top_p: 0.0,
            ..GenerationParams::default()
        };
        assert!(g.validate().is_err());
        let t = TranslationParams {
            beam_size: 0,
            ..TranslationParams::default()
        };
        assert!(t.validate().is_err());
        let e = ServiceEndpoint {
            max_in_flight: 0,
            ..ServiceEndpoint::default()
        };
        assert!(e.validate().is_err());
    }

    #[test]
    fn fan_out_preserves_order() {
        let out = fan_out(50, 8, |i| {
            std::thread::sleep(Duration::from_micros(((50 - i) * 37 % 400) as u64));
            Ok(i * 2)
        })
        .unwrap();
        assert_eq!(out, (0..50).map(|i| i * 2).collect::<Vec<_>>());
    }

    #[test]
    fn fan_out_reports_lowest_failure() {
        let err = fan_out(10, 1, |i| {
            if i >= 3 {
                Err(Error::Invalid(format!("task {i}")))
            } else {
                Ok(i)
            }
        })
        .unwrap_err();
        assert!(err.to_string().contains("task 3"));
    }
}
