//! Embedding providers.

use std::time::Duration;

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::IndexError;

/// Dimensionality of every embedding in the system.
pub const EMBEDDING_DIM: usize = 384;

/// Seed mixed into every token hash by [`HashingEmbedder`].
pub const LOCAL_EMBEDDING_SEED: u64 = 0x5eed_0384_f0a6_e001;

/// A unit-norm vector of [`EMBEDDING_DIM`] finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Validate and normalize raw provider output.
    pub fn normalized(values: Vec<f64>) -> Result<Self, IndexError> {
        if values.len() != EMBEDDING_DIM {
            return Err(IndexError::InvalidVector(format!(
                "expected {EMBEDDING_DIM} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IndexError::InvalidVector("non-finite component".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(IndexError::InvalidVector("zero vector".into()));
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity, clamped to `[-1, 1]`.
    pub fn cosine(&self, other: &Self) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        (dot / (self.norm() * other.norm())).clamp(-1.0, 1.0)
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = IndexError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::normalized(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

#[async_trait]
pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier; indexes built by different providers never mix.
    fn provider_id(&self) -> &str;

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, IndexError>;
}

/// Deterministic offline embedder: every lowercase alphanumeric token is
/// hashed to seed a random projection onto [`EMBEDDING_DIM`] dimensions,
/// and the token vectors are summed and normalized.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    seed: u64,
    id: String,
}

impl HashingEmbedder {
    pub fn new() -> Self {
        Self::with_seed(LOCAL_EMBEDDING_SEED)
    }

    pub fn with_seed(seed: u64) -> Self {
        Self { seed, id: format!("local-hash-v1:{seed:016x}") }
    }

    pub fn embed_sync(&self, text: &str) -> Result<EmbeddingVector, IndexError> {
        if text.trim().is_empty() {
            return Err(IndexError::EmptyText);
        }
        let lowered = text.to_lowercase();
        let mut tokens: Vec<&str> =
            lowered.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).collect();
        if tokens.is_empty() {
            tokens.push(lowered.trim());
        }
        let mut acc = vec![0.0f64; EMBEDDING_DIM];
        for token in tokens {
            let digest = Sha256::digest(token.as_bytes());
            let token_seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ token_seed);
            for slot in acc.iter_mut() {
                *slot += rng.random_range(-1.0..1.0);
            }
        }
        EmbeddingVector::normalized(acc)
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new()
    }
}

#[async_trait]
impl EmbeddingProvider for HashingEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, IndexError> {
        self.embed_sync(text)
    }
}

/// Settings for an OpenAI-compatible `/embeddings` endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteEmbeddingConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub retries: u32,
    pub timeout_ms: u64,
}

impl RemoteEmbeddingConfig {
    /// Read `FORAGE_EMBED_URL`, `FORAGE_EMBED_KEY` and `FORAGE_EMBED_MODEL`.
    pub fn from_env() -> Option<Self> {
        let base_url = std::env::var("FORAGE_EMBED_URL").ok()?;
        Some(Self {
            base_url,
            api_key: std::env::var("FORAGE_EMBED_KEY").ok(),
            model: std::env::var("FORAGE_EMBED_MODEL")
                .unwrap_or_else(|_| "multi-qa-MiniLM-L6-cos-v1".into()),
            retries: 2,
            timeout_ms: 30_000,
        })
    }
}

/// Embedding provider backed by a remote HTTP service returning 384-d vectors.
pub struct RemoteEmbedder {
    config: RemoteEmbeddingConfig,
    client: reqwest::Client,
    id: String,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbeddingConfig) -> Self {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .expect("reqwest client");
        let id = format!("remote:{}:{}", config.base_url, config.model);
        Self { config, client, id }
    }

    async fn attempt(&self, text: &str) -> Result<Vec<f64>, String> {
        #[derive(Deserialize)]
        struct Item {
            embedding: Vec<f64>,
        }
        #[derive(Deserialize)]
        struct Body {
            data: Vec<Item>,
        }
        let url = format!("{}/embeddings", self.config.base_url.trim_end_matches('/'));
        let mut req = self
            .client
            .post(url)
            .json(&serde_json::json!({ "model": self.config.model, "input": [text] }));
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        let body: Body = resp.json().await.map_err(|e| e.to_string())?;
        body.data.into_iter().next().map(|i| i.embedding).ok_or_else(|| "empty data".into())
    }
}

#[async_trait]
impl EmbeddingProvider for RemoteEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, IndexError> {
        if text.trim().is_empty() {
            return Err(IndexError::EmptyText);
        }
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                tokio::time::sleep(Duration::from_millis(100 << attempt.min(6))).await;
            }
            match self.attempt(text).await {
                Ok(values) => return EmbeddingVector::normalized(values),
                Err(err) => {
                    tracing::warn!(attempt, %err, "embedding request failed");
                    last = err;
                }
            }
        }
        Err(IndexError::ProviderUnavailable(last))
    }
}
