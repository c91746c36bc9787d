//! Remote chat-completion provider. One HTTP POST per completion carrying
//! the sampling parameters; transport failures are retried with exponential
//! backoff; a global in-flight bound applies across threads.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use log::debug;
use serde_json::{json, Value};

use super::{GenError, Generator, GeneratorConfig, API_KEY_ENV};

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub url: String,
    pub bearer: Option<String>,
    pub body: Value,
}

#[derive(Debug, Clone)]
pub struct TransportResponse {
    pub status: u16,
    pub body: String,
}

/// The wire layer of the remote provider, injectable in tests.
pub trait ChatTransport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<TransportResponse, String>;
}

/// Production transport over ureq. HTTP error statuses are returned as
/// responses, not transport errors.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new() -> Self {
        let config = ureq::config::Config::builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        UreqTransport {
            agent: config.new_agent(),
        }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl ChatTransport for UreqTransport {
    fn send(&self, request: &ChatRequest) -> Result<TransportResponse, String> {
        let mut req = self
            .agent
            .post(&request.url)
            .header("content-type", "application/json");
        if let Some(token) = &request.bearer {
            req = req.header("authorization", format!("Bearer {token}"));
        }
        let response = req.send_json(&request.body).map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response
            .into_body()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok(TransportResponse { status, body })
    }
}

#[derive(Debug, Clone)]
pub struct RemoteEndpoint {
    pub url: String,
    pub api_key: Option<String>,
}

impl RemoteEndpoint {
    /// Endpoint with the bearer token taken from `QRW_API_KEY` when set.
    pub fn from_env(url: impl Into<String>) -> Self {
        RemoteEndpoint {
            url: url.into(),
            api_key: std::env::var(API_KEY_ENV).ok(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

/// Counting semaphore bounding in-flight requests.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore lock");
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

/// Default in-flight request bound.
pub const DEFAULT_IN_FLIGHT: usize = 4;

pub struct RemoteGenerator<T: ChatTransport = UreqTransport> {
    config: GeneratorConfig,
    endpoint: RemoteEndpoint,
    retry: RetryPolicy,
    transport: T,
    limiter: Semaphore,
    forward_top_k: bool,
}

impl RemoteGenerator<UreqTransport> {
    pub fn new(config: GeneratorConfig, endpoint: RemoteEndpoint) -> Result<Self, GenError> {
        Self::with_transport(config, endpoint, UreqTransport::new())
    }
}

impl<T: ChatTransport> RemoteGenerator<T> {
    pub fn with_transport(
        config: GeneratorConfig,
        endpoint: RemoteEndpoint,
        transport: T,
    ) -> Result<Self, GenError> {
        config.validate()?;
        // top_k is not part of the wire format; forwarded only on request.
        debug!("top_k={} not forwarded to {}", config.top_k, endpoint.url);
        Ok(RemoteGenerator {
            config,
            endpoint,
            retry: RetryPolicy::default(),
            transport,
            limiter: Semaphore::new(DEFAULT_IN_FLIGHT),
            forward_top_k: false,
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_in_flight_bound(mut self, bound: usize) -> Self {
        self.limiter = Semaphore::new(bound.max(1));
        self
    }

    /// Forward top_k for endpoints that accept it.
    pub fn with_top_k_forwarding(mut self, forward: bool) -> Self {
        self.forward_top_k = forward;
        self
    }

    fn request(&self, prompt: &str) -> ChatRequest {
        let mut body = json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "top_p": self.config.top_p,
            "max_tokens": self.config.max_new_tokens,
        });
        if self.forward_top_k {
            body["top_k"] = json!(self.config.top_k);
        }
        ChatRequest {
            url: self.endpoint.url.clone(),
            bearer: self.endpoint.api_key.clone(),
            body,
        }
    }

    fn extract_content(body: &str) -> Result<String, GenError> {
        let value: Value =
            serde_json::from_str(body).map_err(|e| GenError::MalformedResponse(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                GenError::MalformedResponse("missing choices[0].message.content".to_string())
            })
    }
}

fn excerpt(body: &str) -> String {
    let mut s: String = body.chars().take(200).collect();
    if body.chars().count() > 200 {
        s.push('…');
    }
    s
}

impl<T: ChatTransport> Generator for RemoteGenerator<T> {
    fn complete(&self, prompt: &str) -> Result<String, GenError> {
        if prompt.is_empty() {
            return Err(GenError::EmptyPrompt);
        }
        let request = self.request(prompt);
        let _permit = self.limiter.acquire();
        let mut backoff = self.retry.initial_backoff;
        let mut last_error = String::new();
        for attempt in 1..=self.retry.attempts {
            match self.transport.send(&request) {
                Ok(response) if (200..300).contains(&response.status) => {
                    return Self::extract_content(&response.body);
                }
                Ok(response) => {
                    return Err(GenError::Status {
                        status: response.status,
                        body_excerpt: excerpt(&response.body),
                    });
                }
                Err(e) => {
                    last_error = e;
                    if attempt < self.retry.attempts {
                        std::thread::sleep(backoff);
                        backoff *= 2;
                    }
                }
            }
        }
        Err(GenError::Transport {
            attempts: self.retry.attempts,
            last: last_error,
        })
    }
}
