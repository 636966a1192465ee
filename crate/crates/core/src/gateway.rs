//! LLM gateway: the JSON wire format, a deterministic mock backend, an HTTP
//! backend, and retry with exponential backoff.

use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Environment variable consulted for the HTTP bearer token.
pub const TOKEN_ENV_VAR: &str = "UTIKIT_GATEWAY_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionReply {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("gateway returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed gateway reply: {0}")]
    Malformed(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Status { status, .. } => matches!(status, 408 | 429 | 500..=599),
            BackendError::Transport(_) => true,
            BackendError::Malformed(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: BackendError },
    #[error(transparent)]
    Fatal(BackendError),
}

pub trait LlmBackend: Send + Sync {
    /// Identifier recorded alongside generated data.
    fn id(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionReply, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, initial_backoff_ms: 200, max_backoff_ms: 5_000 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): doubling, capped.
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry).unwrap_or(u64::MAX);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

/// Successful generation plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayResponse {
    pub text: String,
    pub usage: Usage,
    pub retries: u32,
    pub backend: String,
}

pub struct Gateway {
    backend: Box<dyn LlmBackend>,
    pub model: String,
    pub max_tokens: u32,
    pub retry: RetryPolicy,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.id())
            .field("model", &self.model)
            .field("retry", &self.retry)
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: Box<dyn LlmBackend>, model: impl Into<String>, retry: RetryPolicy) -> Self {
        Gateway { backend, model: model.into(), max_tokens: 512, retry }
    }

    /// Gateway over the deterministic [`MockBackend`] with no backoff delay.
    pub fn mock() -> Self {
        Gateway::new(Box::new(MockBackend), "mock", RetryPolicy { initial_backoff_ms: 0, ..RetryPolicy::default() })
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    /// Sends `prompt`, retrying retryable failures per the policy.
    pub fn generate(&self, prompt: &str, temperature: f64) -> Result<GatewayResponse, GatewayError> {
        let request = CompletionRequest {
            model: self.model.clone(),
            prompt: prompt.to_string(),
            temperature,
            max_tokens: self.max_tokens,
        };
        let mut retries = 0;
        loop {
            match self.backend.complete(&request) {
                Ok(reply) => {
                    return Ok(GatewayResponse {
                        text: reply.text,
                        usage: reply.usage,
                        retries,
                        backend: self.backend.id().to_string(),
                    })
                }
                Err(e) if !e.is_retryable() => return Err(GatewayError::Fatal(e)),
                Err(e) if retries >= self.retry.max_retries => {
                    return Err(GatewayError::RetriesExhausted { attempts: retries + 1, last: e })
                }
                Err(_) => {
                    std::thread::sleep(self.retry.backoff(retries));
                    retries += 1;
                }
            }
        }
    }
}

/// Deterministic offline backend.
///
/// Knowledge prompts get a templated answer echoing the diagnostic label and
/// the per-region motion direction; judge prompts are scored by keyword
/// overlap with the supplied context. Anything else is acknowledged verbatim.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

impl LlmBackend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionReply, BackendError> {
        let text = if let Some(reply) = crate::eval::mock_judge_reply(&request.prompt) {
            reply
        } else if let Some(parsed) = crate::forge::parse_knowledge_prompt(&request.prompt) {
            crate::forge::mock_doctor_reply(&parsed)
        } else {
            format!("acknowledged: {}", request.prompt.split_whitespace().take(12).collect::<Vec<_>>().join(" "))
        };
        let usage = Usage {
            prompt_tokens: request.prompt.split_whitespace().count() as u64,
            completion_tokens: text.split_whitespace().count() as u64,
        };
        Ok(CompletionReply { text, usage })
    }
}

/// POSTs the wire-format request as JSON to `endpoint`.
pub struct HttpBackend {
    endpoint: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend { endpoint: endpoint.into(), token, agent }
    }

    /// Token taken from [`TOKEN_ENV_VAR`] when set.
    pub fn from_env(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self::new(endpoint, std::env::var(TOKEN_ENV_VAR).ok().filter(|t| !t.is_empty()), timeout)
    }
}

impl LlmBackend for HttpBackend {
    fn id(&self) -> &str {
        "http"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionReply, BackendError> {
        let mut req = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(token) = &self.token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send_json(request).map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Status { status, body });
        }
        serde_json::from_str(&body).map_err(|e| BackendError::Malformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        failures: u32,
        status: u16,
        calls: AtomicU32,
    }

    impl LlmBackend for Flaky {
        fn id(&self) -> &str {
            "flaky"
        }
        fn complete(&self, _: &CompletionRequest) -> Result<CompletionReply, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(BackendError::Status { status: self.status, body: "busy".into() })
            } else {
                Ok(CompletionReply { text: "ok".into(), usage: Usage::default() })
            }
        }
    }

    fn gateway(failures: u32, status: u16) -> Gateway {
        Gateway::new(
            Box::new(Flaky { failures, status, calls: AtomicU32::new(0) }),
            "m",
            RetryPolicy { max_retries: 3, initial_backoff_ms: 0, max_backoff_ms: 0 },
        )
    }

    #[test]
    fn two_server_errors_then_success() {
        let r = gateway(2, 503).generate("hi", 0.5).unwrap();
        assert_eq!(r.text, "ok");
        assert_eq!(r.retries, 2);
    }

    #[test]
    fn exhaustion_and_fatal() {
        assert_eq!(
            gateway(10, 500).generate("hi", 0.5).unwrap_err(),
            GatewayError::RetriesExhausted {
                attempts: 4,
                last: BackendError::Status { status: 500, body: "busy".into() }
            }
        );
        assert!(matches!(gateway(1, 400).generate("hi", 0.5), Err(GatewayError::Fatal(_))));
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy { max_retries: 5, initial_backoff_ms: 100, max_backoff_ms: 350 };
        let delays: Vec<u128> = (0..4).map(|i| p.backoff(i).as_millis()).collect();
        assert_eq!(delays, vec![100, 200, 350, 350]);
        assert_eq!(p.backoff(200).as_millis(), 350);
    }

    #[test]
    fn mock_is_deterministic() {
        let g = Gateway::mock();
        let a = g.generate("free text prompt", 0.7).unwrap();
        let b = g.generate("free text prompt", 0.7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.backend, "mock");
        assert_eq!(a.usage.prompt_tokens, 3);
    }
}
