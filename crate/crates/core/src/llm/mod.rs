//! Model-role addressed completions, prompt rendering and response parsing.

mod heuristic;
mod mock;
mod parse;
mod prompt;
mod remote;

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use futures::stream::BoxStream;
use futures::StreamExt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use heuristic::heuristic_response;
pub use mock::{fixture_key, MockBackend, MOCK_SENTINEL};
pub use parse::{normalize_attribute, parse_attributes, parse_snippets, parse_suggestions};
pub use prompt::{
    bindings, format_context, format_list, format_samples, format_table, render_prompt, Bindings,
    PromptKind, ASK_DOC_EXAMPLES, ASK_DOC_EXAMPLES_VERSION, REASK_SUFFIX,
};
pub use remote::{RemoteBackend, RemoteLlmConfig};

pub const ACTION_TEMPERATURE: f32 = 0.0;
pub const ACTION_MAX_TOKENS: u32 = 256;
pub const SUGGESTION_TEMPERATURE: f32 = 0.7;
pub const SUGGESTION_MAX_TOKENS: u32 = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("prompt {} is missing a binding for {{{name}}}", kind.as_str())]
    MissingBinding { kind: PromptKind, name: String },
    #[error("LLM backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("unparseable model response: {0}")]
    UnparseableResponse(String),
    #[error("request parameters violate routing rules: {0}")]
    ParameterViolation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRole {
    /// Per-document actions and suggestions.
    Fast,
    /// Attribute detection and collection-level synthesis.
    Strong,
}

impl ModelRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelRole::Fast => "fast",
            ModelRole::Strong => "strong",
        }
    }
}

impl fmt::Display for ModelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Concrete model names behind each role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelNames {
    pub fast: String,
    pub strong: String,
}

impl ModelNames {
    pub fn resolve(&self, role: ModelRole) -> &str {
        match role {
            ModelRole::Fast => &self.fast,
            ModelRole::Strong => &self.strong,
        }
    }
}

impl Default for ModelNames {
    fn default() -> Self {
        Self { fast: "gpt-3.5-turbo".into(), strong: "gpt-4".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub kind: PromptKind,
    pub role: ModelRole,
    pub prompt: String,
    pub temperature: f32,
    pub max_tokens: u32,
    pub stream: bool,
}

impl ChatRequest {
    /// A streaming request with the role and sampling parameters `kind` requires.
    pub fn new(kind: PromptKind, prompt: String) -> Self {
        let (role, temperature, max_tokens) = expected_params(kind);
        Self { kind, role, prompt, temperature, max_tokens, stream: true }
    }

    /// The same request with [`REASK_SUFFIX`] appended to the prompt.
    pub fn reask(&self) -> Self {
        Self { prompt: format!("{}{REASK_SUFFIX}", self.prompt), ..self.clone() }
    }
}

fn expected_params(kind: PromptKind) -> (ModelRole, f32, u32) {
    match kind {
        PromptKind::Search | PromptKind::AskDoc => (ModelRole::Fast, ACTION_TEMPERATURE, ACTION_MAX_TOKENS),
        PromptKind::DetectAttributes | PromptKind::Synthesize => {
            (ModelRole::Strong, ACTION_TEMPERATURE, ACTION_MAX_TOKENS)
        }
        PromptKind::Suggestions => (ModelRole::Fast, SUGGESTION_TEMPERATURE, SUGGESTION_MAX_TOKENS),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Complete,
    Truncated,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub chunks: Vec<String>,
    pub text: String,
    pub finish: FinishReason,
}

/// Items produced by a backend stream.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamItem {
    Delta(String),
    Finished(FinishReason),
}

pub type CompletionStream = BoxStream<'static, Result<StreamItem, GatewayError>>;

#[async_trait]
pub trait LlmBackend: Send + Sync {
    /// Start a completion for `request` on the resolved `model`.
    async fn stream(&self, model: &str, request: &ChatRequest) -> Result<CompletionStream, GatewayError>;
}

/// One line of the gateway's audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub kind: PromptKind,
    pub role: ModelRole,
    pub model: String,
    pub temperature: f32,
    pub max_tokens: u32,
}

/// Front door for every model call: checks parameter routing, resolves the
/// role to a model, records an audit entry and assembles the stream.
pub struct Gateway {
    backend: Arc<dyn LlmBackend>,
    models: ModelNames,
    audit: Mutex<Vec<AuditRecord>>,
    calls: AtomicUsize,
}

impl Gateway {
    pub fn new(backend: Arc<dyn LlmBackend>, models: ModelNames) -> Self {
        Self { backend, models, audit: Mutex::new(Vec::new()), calls: AtomicUsize::new(0) }
    }

    pub fn models(&self) -> &ModelNames {
        &self.models
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn audit_log(&self) -> Vec<AuditRecord> {
        self.audit.lock().expect("audit lock").clone()
    }

    fn check(&self, request: &ChatRequest) -> Result<(), GatewayError> {
        let (role, temperature, max_tokens) = expected_params(request.kind);
        if request.role != role || request.temperature != temperature || request.max_tokens != max_tokens {
            return Err(GatewayError::ParameterViolation(format!(
                "{} expects role={role} temperature={temperature} max_tokens={max_tokens}, got role={} temperature={} max_tokens={}",
                request.kind.as_str(),
                request.role,
                request.temperature,
                request.max_tokens
            )));
        }
        Ok(())
    }

    pub async fn complete(&self, request: &ChatRequest) -> Result<LlmResponse, GatewayError> {
        self.complete_with(request, |_| {}).await
    }

    /// Like [`Gateway::complete`], calling `on_chunk` for each delta as it arrives.
    pub async fn complete_with(
        &self,
        request: &ChatRequest,
        mut on_chunk: impl FnMut(&str) + Send,
    ) -> Result<LlmResponse, GatewayError> {
        self.check(request)?;
        let model = self.models.resolve(request.role).to_string();
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.audit.lock().expect("audit lock").push(AuditRecord {
            kind: request.kind,
            role: request.role,
            model: model.clone(),
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        });
        let mut stream = self.backend.stream(&model, request).await?;
        let mut chunks = Vec::new();
        let mut finish = FinishReason::Complete;
        while let Some(item) = stream.next().await {
            match item {
                Ok(StreamItem::Delta(delta)) => {
                    on_chunk(&delta);
                    chunks.push(delta);
                }
                Ok(StreamItem::Finished(reason)) => {
                    finish = reason;
                    break;
                }
                Err(err) => {
                    tracing::warn!(%err, "completion stream failed");
                    finish = FinishReason::Error;
                    break;
                }
            }
        }
        let text = chunks.concat();
        Ok(LlmResponse { chunks, text, finish })
    }

    /// Complete and parse; on a parse failure re-ask once with
    /// [`REASK_SUFFIX`] before giving up.
    pub async fn complete_parsed<T>(
        &self,
        request: &ChatRequest,
        parse: impl Fn(&str) -> Result<T, GatewayError> + Send + Sync,
    ) -> Result<T, GatewayError> {
        let first = self.complete(request).await?;
        match parse(&first.text) {
            Ok(value) => Ok(value),
            Err(err) => {
                tracing::debug!(%err, kind = request.kind.as_str(), "re-asking for JSON");
                let second = self.complete(&request.reask()).await?;
                parse(&second.text)
            }
        }
    }
}
