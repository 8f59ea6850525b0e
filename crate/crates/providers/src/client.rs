//! Blocking JSON-over-HTTP transport with retries.

use std::sync::Mutex;
use std::time::Duration;

use mtrank_core::provider::ProviderError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ureq::Agent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderEndpoint {
    /// Scheme, host and optional path prefix, e.g. `http://localhost:8000`.
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_batch: usize,
    pub supports_concurrency: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token: Option<String>,
}

impl ProviderEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            timeout_ms: 30_000,
            max_batch: 64,
            supports_concurrency: true,
            auth_token: None,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.timeout_ms == 0 {
            return Err(ProviderError::Unsupported("timeout_ms must be > 0".into()));
        }
        if self.max_batch == 0 {
            return Err(ProviderError::Unsupported("max_batch must be >= 1".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(ProviderError::Unsupported(format!("not an http(s) url: {}", self.base_url)));
        }
        Ok(())
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base_url, path)
    }
}

/// Exponential backoff for transient failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff_ms: 200,
            max_backoff_ms: 5_000,
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            ..Self::default()
        }
    }

    /// Delay before retry number `attempt` (0-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.initial_backoff_ms.saturating_mul(1u64 << attempt.min(32));
        Duration::from_millis(ms.min(self.max_backoff_ms))
    }
}

/// Content hash of one successful response body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub path: String,
    pub sha256: String,
}

/// Shared HTTP client for one endpoint. Safe to use from many threads;
/// requests are serialized when the endpoint does not support concurrency.
pub struct HttpClient {
    endpoint: ProviderEndpoint,
    retry: RetryPolicy,
    agent: Agent,
    gate: Option<Mutex<()>>,
    audit: Mutex<Vec<AuditEntry>>,
}

impl HttpClient {
    pub fn new(endpoint: ProviderEndpoint, retry: RetryPolicy) -> Result<Self, ProviderError> {
        endpoint.validate()?;
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(endpoint.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = (!endpoint.supports_concurrency).then(|| Mutex::new(()));
        Ok(Self {
            endpoint,
            retry,
            agent,
            gate,
            audit: Mutex::new(Vec::new()),
        })
    }

    pub fn endpoint(&self) -> &ProviderEndpoint {
        &self.endpoint
    }

    /// Hashes of every response received so far, in arrival order.
    pub fn audit_log(&self) -> Vec<AuditEntry> {
        self.audit.lock().map(|a| a.clone()).unwrap_or_default()
    }

    /// POSTs `body` to `path` and decodes the response, retrying transient
    /// failures. Non-2xx statuses surface as `BadStatus`.
    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp, ProviderError> {
        let payload = serde_json::to_string(body).map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
        let mut attempt = 0;
        loop {
            match self.post_once(path, &payload) {
                Ok(text) => {
                    let resp = serde_json::from_str(&text)
                        .map_err(|e| ProviderError::MalformedResponse(format!("{path}: {e}")))?;
                    if let Ok(mut log) = self.audit.lock() {
                        log.push(AuditEntry {
                            path: path.to_string(),
                            sha256: hex::encode(Sha256::digest(text.as_bytes())),
                        });
                    }
                    return Ok(resp);
                }
                Err(e) if e.is_transient() && attempt < self.retry.max_retries => {
                    std::thread::sleep(self.retry.backoff(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn post_once(&self, path: &str, payload: &str) -> Result<String, ProviderError> {
        let _guard = match &self.gate {
            Some(m) => Some(m.lock().map_err(|_| ProviderError::Transport("poisoned request gate".into()))?),
            None => None,
        };
        let mut req = self
            .agent
            .post(&self.endpoint.url(path))
            .header("content-type", "application/json");
        if let Some(tok) = &self.endpoint.auth_token {
            req = req.header("authorization", &format!("Bearer {tok}"));
        }
        let mut resp = req.send(payload).map_err(map_transport)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(ProviderError::BadStatus(status));
        }
        resp.body_mut().read_to_string().map_err(map_transport)
    }
}

fn map_transport(e: ureq::Error) -> ProviderError {
    match e {
        ureq::Error::Timeout(_) => ProviderError::Timeout,
        ureq::Error::StatusCode(code) => ProviderError::BadStatus(code),
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => ProviderError::Timeout,
        other => ProviderError::Transport(other.to_string()),
    }
}
