//! Completion providers behind one trait, plus the batch runner that drives them.
//!
//! Implementations must tolerate concurrent calls: [`run_batch`] shares one backend across
//! its worker threads.

mod batch;
mod cache;
mod http;
mod offline;

pub use batch::{run_batch, BatchFailure, BatchOutcome, BatchRequest};
pub use cache::{cache_key, hex_digest, CacheEntry, CachedBackend, ReplayCache};
pub use http::{HttpBackend, HttpConfig};
pub use offline::{OracleBackend, PredictionsBackend};

use serde::{Deserialize, Serialize};

use sentcomp_core::CompressionExample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub model_id: String,
    /// 0 selects greedy decoding.
    pub temperature: f64,
    pub max_new_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self { model_id: String::new(), temperature: 0.0, max_new_tokens: 128 }
    }
}

impl DecodingParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(BackendError::InvalidParams(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if self.max_new_tokens == 0 {
            return Err(BackendError::InvalidParams("max_new_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub example: &'a CompressionExample,
    /// The exact string sent to the provider.
    pub prompt: &'a str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("invalid decoding parameters: {0}")]
    InvalidParams(String),
    #[error("replay cache has no entry for key {key} (example {example_id:?})")]
    CacheMiss { key: String, example_id: String },
    #[error("no prediction for example {0:?}")]
    MissingPrediction(String),
    #[error("HTTP {status} after {attempts} attempt(s): {body}")]
    Http { status: u16, attempts: u32, body: String },
    #[error("request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("provider error: {0}")]
    Provider(String),
    #[error("{0}")]
    Io(String),
}

pub trait Backend: Send + Sync {
    /// Stable identifier written into every record.
    fn id(&self) -> String;

    fn complete(&self, request: CompletionRequest<'_>, params: &DecodingParams) -> Result<Completion, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: CompletionRequest<'_>, params: &DecodingParams) -> Result<Completion, BackendError> {
        (**self).complete(request, params)
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: CompletionRequest<'_>, params: &DecodingParams) -> Result<Completion, BackendError> {
        (**self).complete(request, params)
    }
}
