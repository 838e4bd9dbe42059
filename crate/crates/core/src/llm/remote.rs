//! OpenAI-compatible chat-completion backend.

use std::time::Duration;

use async_trait::async_trait;
use futures::StreamExt;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ChatRequest, CompletionStream, FinishReason, GatewayError, LlmBackend, StreamItem};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteLlmConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub retries: u32,
    pub timeout_ms: u64,
}

pub struct RemoteBackend {
    config: RemoteLlmConfig,
    client: reqwest::Client,
}

impl RemoteBackend {
    pub fn new(config: RemoteLlmConfig) -> Self {
        let client = reqwest::Client::builder()
            .connect_timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .expect("reqwest client");
        Self { config, client }
    }

    async fn send(&self, model: &str, request: &ChatRequest) -> Result<reqwest::Response, String> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = serde_json::json!({
            "model": model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "stream": request.stream,
        });
        let mut req = self.client.post(url).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("HTTP {}", resp.status()));
        }
        Ok(resp)
    }
}

fn finish_reason(value: &Value) -> Option<FinishReason> {
    match value.as_str()? {
        "length" => Some(FinishReason::Truncated),
        "stop" => Some(FinishReason::Complete),
        _ => Some(FinishReason::Error),
    }
}

/// Decode one server-sent-event line of a streamed completion.
pub(crate) fn parse_sse_line(line: &str) -> Vec<StreamItem> {
    let Some(data) = line.trim_end_matches('\r').strip_prefix("data:") else {
        return Vec::new();
    };
    let data = data.trim();
    if data == "[DONE]" {
        return vec![StreamItem::Finished(FinishReason::Complete)];
    }
    let Ok(value) = serde_json::from_str::<Value>(data) else {
        return Vec::new();
    };
    let choice = &value["choices"][0];
    let mut items = Vec::new();
    if let Some(delta) = choice["delta"]["content"].as_str().filter(|d| !d.is_empty()) {
        items.push(StreamItem::Delta(delta.to_string()));
    }
    if let Some(reason) = finish_reason(&choice["finish_reason"]) {
        items.push(StreamItem::Finished(reason));
    }
    items
}

#[async_trait]
impl LlmBackend for RemoteBackend {
    async fn stream(&self, model: &str, request: &ChatRequest) -> Result<CompletionStream, GatewayError> {
        let mut last = String::new();
        let mut response = None;
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                tokio::time::sleep(Duration::from_millis(200 << attempt.min(5))).await;
            }
            match self.send(model, request).await {
                Ok(resp) => {
                    response = Some(resp);
                    break;
                }
                Err(err) => {
                    tracing::warn!(attempt, %err, "chat completion request failed");
                    last = err;
                }
            }
        }
        let response = response.ok_or(GatewayError::BackendUnavailable(last))?;

        if !request.stream {
            let body: Value = response
                .json()
                .await
                .map_err(|e| GatewayError::BackendUnavailable(e.to_string()))?;
            let choice = &body["choices"][0];
            let text = choice["message"]["content"].as_str().unwrap_or_default().to_string();
            let finish = finish_reason(&choice["finish_reason"]).unwrap_or(FinishReason::Complete);
            let items = vec![Ok(StreamItem::Delta(text)), Ok(StreamItem::Finished(finish))];
            return Ok(Box::pin(futures::stream::iter(items)));
        }

        let bytes = response.bytes_stream();
        // Buffer raw bytes so a character split across chunks decodes intact.
        let lines = futures::stream::unfold(
            (bytes, Vec::<u8>::new(), false),
            |(mut bytes, mut buf, done)| async move {
                if done {
                    return None;
                }
                loop {
                    if let Some(pos) = buf.iter().position(|b| *b == b'\n') {
                        let line: Vec<u8> = buf.drain(..=pos).collect();
                        return Some((Ok(String::from_utf8_lossy(&line).into_owned()), (bytes, buf, false)));
                    }
                    match bytes.next().await {
                        Some(Ok(chunk)) => buf.extend_from_slice(&chunk),
                        Some(Err(e)) => {
                            return Some((Err(GatewayError::BackendUnavailable(e.to_string())), (bytes, buf, true)))
                        }
                        None if buf.is_empty() => return None,
                        None => {
                            let line = String::from_utf8_lossy(&std::mem::take(&mut buf)).into_owned();
                            return Some((Ok(line), (bytes, buf, true)));
                        }
                    }
                }
            },
        );
        let items = lines.flat_map(|line| {
            let items: Vec<Result<StreamItem, GatewayError>> = match line {
                Ok(line) => parse_sse_line(&line).into_iter().map(Ok).collect(),
                Err(e) => vec![Err(e)],
            };
            futures::stream::iter(items)
        });
        Ok(Box::pin(items))
    }
}
