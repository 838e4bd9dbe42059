//! Chunk embeddings and per-document retrieval (semantic top-k and lexical).

mod embed;

use std::cmp::Ordering;

use futures::future::BoxFuture;
use futures::{FutureExt, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Chunk, Collection, CollectionId, DocId, Document};

pub use embed::{
    EmbeddingProvider, EmbeddingVector, HashingEmbedder, RemoteEmbedder, RemoteEmbeddingConfig,
    EMBEDDING_DIM, LOCAL_EMBEDDING_SEED,
};

/// Number of chunks retrieved per document as LLM context.
pub const DEFAULT_TOP_K: usize = 30;

/// Default number of concurrent embedding calls while building an index.
pub const DEFAULT_EMBED_FANOUT: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("invalid embedding: {0}")]
    InvalidVector(String),
    #[error("document {0} is not in the index")]
    UnknownDocument(DocId),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("embedding chunk {index} of document {doc_id}: {source}")]
    Chunk {
        doc_id: DocId,
        index: usize,
        #[source]
        source: Box<IndexError>,
    },
    #[error("index was built with provider {index} but {active} is active")]
    ProviderMismatch { index: String, active: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub doc_id: DocId,
    pub chunk_index: usize,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentEntries {
    pub doc_id: DocId,
    pub entries: Vec<IndexEntry>,
}

/// Identifies the exact index a cached action result was computed against.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexKey {
    pub provider_id: String,
    pub index_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    pub provider_id: String,
    pub collection_id: CollectionId,
    pub documents: Vec<DocumentEntries>,
}

/// One retrieved chunk with its cosine similarity to the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub doc_id: DocId,
    pub chunk_index: usize,
    pub score: f64,
}

async fn embed_chunk(provider: &dyn EmbeddingProvider, chunk: &Chunk) -> Result<IndexEntry, IndexError> {
    provider
        .embed(&chunk.text)
        .await
        .map(|vector| IndexEntry { doc_id: chunk.doc_id.clone(), chunk_index: chunk.index, vector })
        .map_err(|source| IndexError::Chunk { doc_id: chunk.doc_id.clone(), index: chunk.index, source: Box::new(source) })
}

impl VectorIndex {
    /// Embed every chunk of `collection`, at most `fanout` calls in flight.
    pub async fn build(
        collection: &Collection,
        provider: &dyn EmbeddingProvider,
        fanout: usize,
    ) -> Result<Self, IndexError> {
        let mut documents = Vec::with_capacity(collection.documents.len());
        for doc in &collection.documents {
            let pending: Vec<BoxFuture<'_, Result<IndexEntry, IndexError>>> = doc
                .chunks
                .iter()
                .map(|chunk| embed_chunk(provider, chunk).boxed())
                .collect();
            let entries = futures::stream::iter(pending)
                .buffered(fanout.max(1))
                .try_collect::<Vec<_>>()
                .await?;
            documents.push(DocumentEntries { doc_id: doc.id.clone(), entries });
        }
        Ok(Self {
            provider_id: provider.provider_id().to_string(),
            collection_id: collection.id.clone(),
            documents,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.iter().map(|d| d.entries.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn entries(&self, doc_id: &DocId) -> Result<&[IndexEntry], IndexError> {
        self.documents
            .iter()
            .find(|d| &d.doc_id == doc_id)
            .map(|d| d.entries.as_slice())
            .ok_or_else(|| IndexError::UnknownDocument(doc_id.clone()))
    }

    /// Content hash over the provider id and every stored vector.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.provider_id.as_bytes());
        hasher.update([0]);
        for doc in &self.documents {
            hasher.update(doc.doc_id.0.as_bytes());
            hasher.update([0]);
            for entry in &doc.entries {
                hasher.update((entry.chunk_index as u64).to_le_bytes());
                for v in entry.vector.values() {
                    hasher.update(v.to_bits().to_le_bytes());
                }
            }
        }
        hex(&hasher.finalize())
    }

    pub fn key(&self) -> IndexKey {
        IndexKey { provider_id: self.provider_id.clone(), index_hash: self.fingerprint() }
    }

    /// Top-`k` chunks of one document by cosine similarity to `query`.
    /// Ties keep ascending chunk order.
    pub fn topk_by_vector(
        &self,
        doc_id: &DocId,
        query: &EmbeddingVector,
        k: usize,
    ) -> Result<Vec<SearchHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        let mut hits: Vec<SearchHit> = self
            .entries(doc_id)?
            .iter()
            .map(|e| SearchHit {
                doc_id: e.doc_id.clone(),
                chunk_index: e.chunk_index,
                score: query.cosine(&e.vector),
            })
            .collect();
        hits.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then(a.chunk_index.cmp(&b.chunk_index))
        });
        hits.truncate(k);
        Ok(hits)
    }

    /// Embed `query` with `provider` and retrieve the top-`k` chunks.
    pub async fn semantic_topk(
        &self,
        provider: &dyn EmbeddingProvider,
        doc_id: &DocId,
        query: &str,
        k: usize,
    ) -> Result<Vec<SearchHit>, IndexError> {
        if provider.provider_id() != self.provider_id {
            return Err(IndexError::ProviderMismatch {
                index: self.provider_id.clone(),
                active: provider.provider_id().to_string(),
            });
        }
        self.entries(doc_id)?;
        let vector = provider.embed(query).await?;
        self.topk_by_vector(doc_id, &vector, k)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A case-insensitive occurrence of a query inside a chunk, in absolute
/// document character offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalMatch {
    pub chunk: Chunk,
    pub match_start: usize,
    pub match_end: usize,
}

/// Lowercase a character only when that keeps it a single scalar value, so
/// folded text has the same length (and offsets) as the original.
fn fold(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

fn is_word_char(c: Option<&char>) -> bool {
    c.is_some_and(|c| c.is_alphanumeric())
}

/// Every chunk containing `query` (case-insensitive), in document order, with
/// the first occurrence in each. With `whole_word`, a match must not be
/// flanked by alphanumeric characters.
pub fn lexical_find(document: &Document, query: &str, whole_word: bool) -> Vec<LexicalMatch> {
    let needle: Vec<char> = query.chars().map(fold).collect();
    if needle.is_empty() {
        return Vec::new();
    }
    document
        .chunks
        .iter()
        .filter_map(|chunk| {
            let hay: Vec<char> = chunk.text.chars().map(fold).collect();
            if needle.len() > hay.len() {
                return None;
            }
            let pos = (0..=hay.len() - needle.len()).find(|&p| {
                hay[p..p + needle.len()] == needle[..]
                    && (!whole_word
                        || (!is_word_char(p.checked_sub(1).and_then(|i| hay.get(i)))
                            && !is_word_char(hay.get(p + needle.len()))))
            })?;
            Some(LexicalMatch {
                chunk: chunk.clone(),
                match_start: chunk.char_start + pos,
                match_end: chunk.char_start + pos + needle.len(),
            })
        })
        .collect()
}
