//! Text-generation providers: a remote chat-completion client, a
//! deterministic offline mock, and a persistent generation cache.

mod cache;
mod mock;
mod remote;

pub use cache::GenerationCache;
pub use mock::{bundled_vocab, mock_complete, MockGenerator, BUNDLED_VOCAB};
pub use remote::{
    ChatRequest, ChatTransport, RemoteEndpoint, RemoteGenerator, RetryPolicy, TransportResponse,
    UreqTransport,
};

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Environment variable consulted for the remote bearer token.
pub const API_KEY_ENV: &str = "QRW_API_KEY";

#[derive(Debug, Error)]
pub enum GenError {
    #[error("prompt must not be empty")]
    EmptyPrompt,
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("transport failure after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: String },
    #[error("remote returned status {status}: {body_excerpt}")]
    Status { status: u16, body_excerpt: String },
    #[error("malformed remote response: {0}")]
    MalformedResponse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Remote,
    #[default]
    Mock,
}

impl ProviderKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProviderKind::Remote => "remote",
            ProviderKind::Mock => "mock",
        }
    }
}

/// Sampling and provider settings for one generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub provider: ProviderKind,
    pub model_name: String,
    /// Nucleus sampling cutoff probability, in (0, 1].
    pub top_p: f64,
    pub top_k: u32,
    /// Must be >= 1.
    pub repetition_penalty: f64,
    pub max_new_tokens: u32,
    /// Drives the mock provider only.
    pub seed: u64,
    pub temperature: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            provider: ProviderKind::Mock,
            model_name: "mock".to_string(),
            top_p: 0.92,
            top_k: 200,
            repetition_penalty: 1.2,
            max_new_tokens: 64,
            seed: 0,
            temperature: 1.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GenError::Config(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if self.repetition_penalty < 1.0 {
            return Err(GenError::Config(format!(
                "repetition_penalty must be >= 1, got {}",
                self.repetition_penalty
            )));
        }
        if self.top_k == 0 {
            return Err(GenError::Config("top_k must be positive".to_string()));
        }
        if self.max_new_tokens == 0 {
            return Err(GenError::Config(
                "max_new_tokens must be positive".to_string(),
            ));
        }
        if self.temperature < 0.0 {
            return Err(GenError::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Stable hex digest over every config field; part of the cache key.
    pub fn fingerprint(&self) -> String {
        let canonical = format!(
            "provider={};model={};top_p={};top_k={};repetition_penalty={};max_new_tokens={};seed={};temperature={}",
            self.provider.name(),
            self.model_name,
            self.top_p,
            self.top_k,
            self.repetition_penalty,
            self.max_new_tokens,
            self.seed,
            self.temperature,
        );
        hex_digest(canonical.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance of one completed generation; `(prompt, config_fingerprint)` is
/// the cache key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt: String,
    pub config_fingerprint: String,
    pub output: String,
    /// Seconds since the Unix epoch at generation time.
    pub timestamp: u64,
    pub provider: String,
}

pub(crate) fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// A text-generation provider. Implementations must be shareable across
/// concurrent pipeline tasks.
pub trait Generator: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, GenError>;
}

/// Wraps any generator with the persistent cache: hits return the stored
/// output byte-identically and skip the inner provider entirely.
pub struct CachedGenerator<G> {
    inner: G,
    cache: GenerationCache,
    fingerprint: String,
    provider: String,
}

impl<G: Generator> CachedGenerator<G> {
    pub fn new(inner: G, cache: GenerationCache, config: &GeneratorConfig) -> Self {
        CachedGenerator {
            inner,
            cache,
            fingerprint: config.fingerprint(),
            provider: config.provider.name().to_string(),
        }
    }
}

impl<G: Generator> Generator for CachedGenerator<G> {
    fn complete(&self, prompt: &str) -> Result<String, GenError> {
        if let Some(record) = self.cache.get(prompt, &self.fingerprint) {
            return Ok(record.output);
        }
        let output = self.inner.complete(prompt)?;
        let record = GenerationRecord {
            prompt: prompt.to_string(),
            config_fingerprint: self.fingerprint.clone(),
            output: output.clone(),
            timestamp: unix_now(),
            provider: self.provider.clone(),
        };
        self.cache.put(&record)?;
        Ok(output)
    }
}

impl<G: Generator + ?Sized> Generator for &G {
    fn complete(&self, prompt: &str) -> Result<String, GenError> {
        (**self).complete(prompt)
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn complete(&self, prompt: &str) -> Result<String, GenError> {
        (**self).complete(prompt)
    }
}

impl<G: Generator + ?Sized> Generator for std::sync::Arc<G> {
    fn complete(&self, prompt: &str) -> Result<String, GenError> {
        (**self).complete(prompt)
    }
}
