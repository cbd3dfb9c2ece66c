//! OpenAI-compatible chat completions client with bounded exponential backoff.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Backend, BackendError, Completion, CompletionRequest, DecodingParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    /// Either the full `/chat/completions` URL or the API base it hangs off.
    pub endpoint: String,
    /// Environment variable holding the bearer token; unset means no Authorization header.
    pub api_key_env: String,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_retries: 5,
            initial_backoff_ms: 500,
            max_backoff_ms: 30_000,
            timeout_secs: 120,
        }
    }
}

impl HttpConfig {
    pub fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_owned()
        } else {
            format!("{base}/chat/completions")
        }
    }

    fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
    retries: AtomicU64,
}

enum Attempt {
    Done(Result<String, BackendError>),
    Retry(BackendError),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let token = std::env::var(&config.api_key_env).ok().filter(|t| !t.is_empty());
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .build()
            .new_agent();
        Self { url: config.url(), config, token, agent, retries: AtomicU64::new(0) }
    }

    /// Retries performed so far across all requests.
    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    fn attempt(&self, body: &str, attempts: u32) -> Attempt {
        let mut request = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(token) = &self.token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = match request.send(body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(BackendError::Timeout { attempts }),
            Err(e @ (ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound)) => {
                return Attempt::Retry(BackendError::Transport { attempts, message: e.to_string() })
            }
            Err(e) => return Attempt::Done(Err(BackendError::Transport { attempts, message: e.to_string() })),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(BackendError::Timeout { attempts }),
            Err(e) => return Attempt::Retry(BackendError::Transport { attempts, message: e.to_string() }),
        };
        if status == 408 || status == 429 || status >= 500 {
            return Attempt::Retry(BackendError::Http { status, attempts, body: text });
        }
        if !(200..300).contains(&status) {
            let err = provider_message(&text)
                .map(BackendError::Provider)
                .unwrap_or(BackendError::Http { status, attempts, body: text });
            return Attempt::Done(Err(err));
        }
        Attempt::Done(parse_completion(&text))
    }
}

fn provider_message(body: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(body).ok()?;
    let error = value.get("error")?;
    Some(error.get("message").and_then(|m| m.as_str()).map(str::to_owned).unwrap_or_else(|| error.to_string()))
}

fn parse_completion(body: &str) -> Result<String, BackendError> {
    if let Some(message) = provider_message(body) {
        return Err(BackendError::Provider(message));
    }
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| BackendError::Provider(format!("unreadable response: {e}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_owned)
        .ok_or_else(|| BackendError::Provider("response has no choices[0].message.content".into()))
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.url)
    }

    fn complete(&self, request: CompletionRequest<'_>, params: &DecodingParams) -> Result<Completion, BackendError> {
        if request.prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        params.validate()?;
        let body = json!({
            "model": params.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_new_tokens,
        })
        .to_string();
        let start = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body, attempts) {
                Attempt::Done(result) => {
                    if attempts > 1 {
                        log::info!("example {}: completed after {} retries", request.example.id(), attempts - 1);
                    }
                    let latency_ms = start.elapsed().as_millis() as u64;
                    return result.map(|text| Completion { text, latency_ms });
                }
                Attempt::Retry(err) if attempts <= self.config.max_retries => {
                    let wait = self.config.backoff(attempts);
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    log::warn!(
                        "example {}: retry {}/{} in {:?} after: {err}",
                        request.example.id(),
                        attempts,
                        self.config.max_retries,
                        wait
                    );
                    std::thread::sleep(wait);
                }
                Attempt::Retry(err) => return Err(err),
            }
        }
    }
}
