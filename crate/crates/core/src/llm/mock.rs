//! Deterministic offline backend.
//!
//! Responses come from fixtures keyed by [`fixture_key`] (a SHA-256 over the
//! role and prompt), then from an optional responder closure, and otherwise
//! from [`MOCK_SENTINEL`]. Text is streamed in small pieces; a response
//! longer than `max_tokens` whitespace-separated words is cut and finishes
//! as truncated.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use async_trait::async_trait;
use sha2::{Digest, Sha256};

use super::{ChatRequest, CompletionStream, FinishReason, GatewayError, LlmBackend, ModelRole, StreamItem};

/// Returned for prompts with no fixture and no responder answer.
pub const MOCK_SENTINEL: &str = "[mock] no fixture for this prompt";

const PIECE_CHARS: usize = 16;

type Responder = dyn Fn(&ChatRequest) -> Option<String> + Send + Sync;

/// Hex key under which a fixture for `(role, prompt)` is stored.
pub fn fixture_key(role: ModelRole, prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(role.as_str().as_bytes());
    hasher.update(b"\n");
    hasher.update(prompt.as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Default)]
pub struct MockBackend {
    fixtures: RwLock<HashMap<String, String>>,
    responder: Option<Arc<Responder>>,
    latency: Duration,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// A mock answering unknown prompts with [`heuristic_response`].
    ///
    /// [`heuristic_response`]: super::heuristic_response
    pub fn heuristic() -> Self {
        Self::new().with_responder(super::heuristic_response)
    }

    /// Load every `{key}.txt` file in `dir` as a fixture.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mock = Self::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    let text = std::fs::read_to_string(&path)?;
                    mock.fixtures.write().expect("fixtures lock").insert(stem.to_string(), text);
                }
            }
        }
        Ok(mock)
    }

    pub fn with_responder(
        mut self,
        responder: impl Fn(&ChatRequest) -> Option<String> + Send + Sync + 'static,
    ) -> Self {
        self.responder = Some(Arc::new(responder));
        self
    }

    /// Delay every call by `latency` before the first chunk.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn insert_fixture(&self, role: ModelRole, prompt: &str, response: &str) {
        self.fixtures
            .write()
            .expect("fixtures lock")
            .insert(fixture_key(role, prompt), response.to_string());
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn respond(&self, request: &ChatRequest) -> String {
        let key = fixture_key(request.role, &request.prompt);
        if let Some(text) = self.fixtures.read().expect("fixtures lock").get(&key) {
            return text.clone();
        }
        self.responder
            .as_ref()
            .and_then(|r| r(request))
            .unwrap_or_else(|| MOCK_SENTINEL.to_string())
    }
}

fn truncate_words(text: &str, max_words: usize) -> Option<String> {
    let mut words = 0;
    let mut in_word = false;
    for (idx, ch) in text.char_indices() {
        if ch.is_whitespace() {
            in_word = false;
        } else if !in_word {
            in_word = true;
            words += 1;
            if words > max_words {
                return Some(text[..idx].trim_end().to_string());
            }
        }
    }
    None
}

fn pieces(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let size = if chars.len() < 2 * PIECE_CHARS { chars.len().div_ceil(2).max(1) } else { PIECE_CHARS };
    chars.chunks(size).map(|c| c.iter().collect()).collect()
}

#[async_trait]
impl LlmBackend for MockBackend {
    async fn stream(&self, _model: &str, request: &ChatRequest) -> Result<CompletionStream, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if !self.latency.is_zero() {
            tokio::time::sleep(self.latency).await;
        }
        let full = self.respond(request);
        let (text, finish) = match truncate_words(&full, request.max_tokens as usize) {
            Some(cut) => (cut, FinishReason::Truncated),
            None => (full, FinishReason::Complete),
        };
        let mut items: Vec<Result<StreamItem, GatewayError>> =
            pieces(&text).into_iter().map(|p| Ok(StreamItem::Delta(p))).collect();
        items.push(Ok(StreamItem::Finished(finish)));
        Ok(Box::pin(futures::stream::iter(items)))
    }
}
