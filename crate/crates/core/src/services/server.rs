use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Response, Server};

use super::{CallError, MockScript, MockTransport, Transport};
use crate::error::{Error, Result};

/// Serves a [`MockScript`] over real HTTP on a local port.
///
/// Injected failures answer 503 and rejected requests 400, so the network
/// client's retry and error paths can be exercised end to end.
pub struct MockServer {
    server: Arc<Server>,
    mock: Arc<MockTransport>,
    url: String,
    worker: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(script: MockScript) -> Result<Self> {
        let server = Server::http("127.0.0.1:0")
            .map_err(|e| Error::Config(format!("cannot bind mock server: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| Error::Config("mock server has no IP address".into()))?;
        let server = Arc::new(server);
        let mock = Arc::new(MockTransport::new(script));
        let worker = {
            let server = Arc::clone(&server);
            let mock = Arc::clone(&mock);
            std::thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    let mut body = String::new();
                    let parsed = request
                        .as_reader()
                        .read_to_string(&mut body)
                        .ok()
                        .and_then(|_| serde_json::from_str::<serde_json::Value>(&body).ok());
                    let route = request.url().to_owned();
                    let (status, payload) = match parsed {
                        None => (400, serde_json::json!({"error": "body is not JSON"})),
                        Some(value) => match mock.post(&route, &value) {
                            Ok(v) => (200, v),
                            Err(CallError::Transient(m)) => (503, serde_json::json!({"error": m})),
                            Err(CallError::Rejected(m)) => (400, serde_json::json!({"error": m})),
                        },
                    };
                    let header = Header::from_bytes("Content-Type", "application/json").unwrap();
                    let response = Response::from_string(payload.to_string())
                        .with_status_code(status)
                        .with_header(header);
                    let _ = request.respond(response);
                }
            })
        };
        Ok(Self {
            server,
            mock,
            url: format!("http://{addr}"),
            worker: Some(worker),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// The transport answering requests, for inspecting the call log.
    pub fn mock(&self) -> &MockTransport {
        &self.mock
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}
