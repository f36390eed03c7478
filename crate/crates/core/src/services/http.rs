use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;

use super::{CallError, Transport};
use crate::error::{Error, Result};

/// JSON POST over HTTP/1.1.
pub struct HttpTransport {
    base_url: String,
    client: Client,
}

impl HttpTransport {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_owned(),
            client,
        })
    }
}

impl Transport for HttpTransport {
    fn post(&self, route: &str, body: &serde_json::Value) -> Result<serde_json::Value, CallError> {
        let url = format!("{}{}", self.base_url, route);
        let response = self
            .client
            .post(&url)
            .json(body)
            .send()
            .map_err(|e| CallError::Transient(format!("{url}: {e}")))?;
        let status = response.status();
        if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
            return Err(CallError::Transient(format!("{url}: HTTP {status}")));
        }
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(CallError::Rejected(format!("{url}: HTTP {status}: {text}")));
        }
        let bytes = response
            .bytes()
            .map_err(|e| CallError::Transient(format!("{url}: reading body: {e}")))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| CallError::Rejected(format!("{url}: body is not JSON: {e}")))
    }

    fn describe(&self) -> String {
        self.base_url.clone()
    }
}
