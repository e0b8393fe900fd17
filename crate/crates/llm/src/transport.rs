//! Completion backends: live HTTP, fixture replay, and record-through.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use crate::config::LlmConfig;
use crate::fixture::FixtureStore;
use crate::request::CompletionRequest;
use crate::LlmError;

/// Something that turns a request into completion text. `trial` selects
/// among recorded completions when replaying.
pub trait Transport: Send + Sync {
    fn complete(&self, req: &CompletionRequest, trial: usize) -> Result<String, LlmError>;
}

/// Chat-completion POST with bearer authentication.
pub struct HttpTransport {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

impl HttpTransport {
    pub fn new(cfg: &LlmConfig, api_key: impl Into<String>) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.request_timeout_s.max(1)))
            .build()
            .map_err(|e| LlmError::Network(e.to_string()))?;
        Ok(HttpTransport {
            endpoint: cfg.endpoint()?.to_string(),
            api_key: api_key.into(),
            client,
        })
    }
}

/// Content of the first choice of a chat-completion response body.
pub fn parse_chat_response(body: &str) -> Result<String, LlmError> {
    let parsed: ChatResponse = serde_json::from_str(body).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| LlmError::MalformedResponse("no choice with message content".into()))
}

impl Transport for HttpTransport {
    fn complete(&self, req: &CompletionRequest, _trial: usize) -> Result<String, LlmError> {
        log::debug!("POST {} digest {}", self.endpoint, req.digest());
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(req)
            .send()
            .map_err(|e| LlmError::Network(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| LlmError::Network(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Http {
                status: status.as_u16(),
                body,
            });
        }
        parse_chat_response(&body)
    }
}

/// Answers only from fixtures.
pub struct ReplayTransport {
    store: Arc<FixtureStore>,
}

impl ReplayTransport {
    pub fn new(store: Arc<FixtureStore>) -> Self {
        ReplayTransport { store }
    }
}

impl Transport for ReplayTransport {
    fn complete(&self, req: &CompletionRequest, trial: usize) -> Result<String, LlmError> {
        self.store.lookup(req, trial)
    }
}

/// Calls `inner` and persists each answer.
pub struct RecordTransport<T> {
    inner: T,
    store: Arc<FixtureStore>,
}

impl<T: Transport> RecordTransport<T> {
    pub fn new(inner: T, store: Arc<FixtureStore>) -> Self {
        RecordTransport { inner, store }
    }
}

impl<T: Transport> Transport for RecordTransport<T> {
    fn complete(&self, req: &CompletionRequest, trial: usize) -> Result<String, LlmError> {
        let text = self.inner.complete(req, trial)?;
        self.store.record(req, trial, &text)?;
        Ok(text)
    }
}

/// Refuses every call and counts the attempts. Stands in for the network
/// where none must be used.
#[derive(Debug, Default)]
pub struct ForbiddenTransport {
    calls: AtomicUsize,
}

impl ForbiddenTransport {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for ForbiddenTransport {
    fn complete(&self, req: &CompletionRequest, _trial: usize) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(LlmError::Network(format!(
            "network use forbidden (digest {})",
            req.digest()
        )))
    }
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn complete(&self, req: &CompletionRequest, trial: usize) -> Result<String, LlmError> {
        (**self).complete(req, trial)
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn complete(&self, req: &CompletionRequest, trial: usize) -> Result<String, LlmError> {
        (**self).complete(req, trial)
    }
}

/// Backend selector for [`complete`].
pub enum Backend<'a> {
    Live(&'a dyn Transport),
    Replay(&'a FixtureStore),
    Record(&'a dyn Transport, &'a FixtureStore),
}

pub fn complete(req: &CompletionRequest, backend: Backend<'_>, trial: usize) -> Result<String, LlmError> {
    match backend {
        Backend::Live(t) => t.complete(req, trial),
        Backend::Replay(store) => store.lookup(req, trial),
        Backend::Record(t, store) => {
            let text = t.complete(req, trial)?;
            store.record(req, trial, &text)?;
            Ok(text)
        }
    }
}
