//! Document ingestion: sources, offset-tracked chunks and collections.

mod split;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::text::{char_len, slice_chars};

pub use split::{split_sentences, SentenceSpan, ABBREVIATIONS, MAX_CHUNK_CHARS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("document {0:?} has no extractable text")]
    EmptyDocument(String),
    #[error("malformed source: {0}")]
    MalformedSource(String),
    #[error("duplicate filename {0:?}")]
    DuplicateFilename(String),
    #[error("a collection needs at least one document")]
    NoDocuments,
    #[error("unknown document {0}")]
    UnknownDocument(DocId),
    #[error("span {start}..{end} is out of range for a document of {len} characters")]
    SpanOutOfRange { start: usize, end: usize, len: usize },
}

/// Opaque document identifier, unique across collections.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocId(pub String);

impl DocId {
    pub fn new() -> Self {
        Self(format!("doc-{}", uuid::Uuid::new_v4().simple()))
    }
}

impl Default for DocId {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DocId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CollectionId(pub String);

impl CollectionId {
    pub fn new() -> Self {
        Self(format!("col-{}", uuid::Uuid::new_v4().simple()))
    }
}

impl Default for CollectionId {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Display for CollectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One element of a structured extraction: a block of text on a page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceElement {
    pub text: String,
    pub page: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Text { text: String },
    Elements { elements: Vec<SourceElement> },
}

/// A document as handed to ingestion, before chunking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSource {
    pub filename: String,
    #[serde(flatten)]
    pub payload: Payload,
}

impl DocumentSource {
    pub fn text(filename: impl Into<String>, text: impl Into<String>) -> Self {
        Self { filename: filename.into(), payload: Payload::Text { text: text.into() } }
    }

    pub fn elements(filename: impl Into<String>, elements: Vec<SourceElement>) -> Self {
        Self { filename: filename.into(), payload: Payload::Elements { elements } }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: DocId,
    pub index: usize,
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
    pub page: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocId,
    pub filename: String,
    pub full_text: String,
    pub chunks: Vec<Chunk>,
}

impl Document {
    /// Page of the chunk containing character `offset`, if the source had pages.
    pub fn page_at(&self, offset: usize) -> Option<u32> {
        self.chunks
            .iter()
            .find(|c| c.char_start <= offset && offset < c.char_end)
            .or_else(|| self.chunks.iter().rev().find(|c| c.char_start <= offset))
            .and_then(|c| c.page)
    }

    pub fn char_len(&self) -> usize {
        char_len(&self.full_text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collection {
    pub id: CollectionId,
    pub name: String,
    pub goal: Option<String>,
    pub documents: Vec<Document>,
}

impl Collection {
    /// Ingest `sources` in order. Fails on an empty list, on a repeated
    /// filename, or on the first source that does not ingest.
    pub fn create(
        name: impl Into<String>,
        sources: Vec<DocumentSource>,
        goal: Option<String>,
    ) -> Result<Self, CorpusError> {
        if sources.is_empty() {
            return Err(CorpusError::NoDocuments);
        }
        let mut seen = HashSet::new();
        for source in &sources {
            if !seen.insert(source.filename.as_str()) {
                return Err(CorpusError::DuplicateFilename(source.filename.clone()));
            }
        }
        let documents = sources
            .into_iter()
            .map(|source| {
                let filename = source.filename.clone();
                ingest_document(source).map_err(|err| match err {
                    CorpusError::MalformedSource(msg) => {
                        CorpusError::MalformedSource(format!("{filename}: {msg}"))
                    }
                    other => other,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { id: CollectionId::new(), name: name.into(), goal, documents })
    }

    pub fn document(&self, id: &DocId) -> Result<&Document, CorpusError> {
        self.documents
            .iter()
            .find(|d| &d.id == id)
            .ok_or_else(|| CorpusError::UnknownDocument(id.clone()))
    }

    pub fn position(&self, id: &DocId) -> Option<usize> {
        self.documents.iter().position(|d| &d.id == id)
    }

    pub fn chunk_count(&self) -> usize {
        self.documents.iter().map(|d| d.chunks.len()).sum()
    }

    /// Exact text of `[char_start, char_end)` in a document and the page of
    /// the chunk containing `char_start`.
    pub fn resolve_span(
        &self,
        doc_id: &DocId,
        char_start: usize,
        char_end: usize,
    ) -> Result<(String, Option<u32>), CorpusError> {
        resolve_in(self.document(doc_id)?, char_start, char_end)
    }
}

pub(crate) fn resolve_in(
    doc: &Document,
    char_start: usize,
    char_end: usize,
) -> Result<(String, Option<u32>), CorpusError> {
    let len = doc.char_len();
    if char_start >= char_end || char_end > len {
        return Err(CorpusError::SpanOutOfRange { start: char_start, end: char_end, len });
    }
    let text = slice_chars(&doc.full_text, char_start, char_end)
        .expect("bounds checked")
        .to_string();
    Ok((text, doc.page_at(char_start)))
}

/// Split a source into a chunked [`Document`] with a fresh id.
pub fn ingest_document(source: DocumentSource) -> Result<Document, CorpusError> {
    if source.filename.trim().is_empty() {
        return Err(CorpusError::MalformedSource("empty filename".into()));
    }
    let id = DocId::new();
    let (full_text, chunks) = match source.payload {
        Payload::Text { text } => {
            let chunks = chunk_block(&id, &text, 0, None, 0);
            (text, chunks)
        }
        Payload::Elements { elements } => {
            if elements.is_empty() {
                return Err(CorpusError::MalformedSource("structured source has no elements".into()));
            }
            let mut full_text = String::new();
            let mut chunks = Vec::new();
            let mut offset = 0;
            for (i, element) in elements.iter().enumerate() {
                if element.page == 0 {
                    return Err(CorpusError::MalformedSource(format!(
                        "elements[{i}].page must be >= 1"
                    )));
                }
                if i > 0 {
                    full_text.push('\n');
                    offset += 1;
                }
                full_text.push_str(&element.text);
                let mut block = chunk_block(&id, &element.text, offset, Some(element.page), chunks.len());
                chunks.append(&mut block);
                offset += char_len(&element.text);
            }
            (full_text, chunks)
        }
    };
    if chunks.is_empty() {
        return Err(CorpusError::EmptyDocument(source.filename));
    }
    Ok(Document { id, filename: source.filename, full_text, chunks })
}

fn chunk_block(
    doc_id: &DocId,
    text: &str,
    offset: usize,
    page: Option<u32>,
    first_index: usize,
) -> Vec<Chunk> {
    split_sentences(text)
        .into_iter()
        .enumerate()
        .map(|(i, span)| Chunk {
            doc_id: doc_id.clone(),
            index: first_index + i,
            text: span.text,
            char_start: offset + span.char_start,
            char_end: offset + span.char_end,
            page,
        })
        .collect()
}

/// An ingestion manifest: documents plus optional collection metadata.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub name: Option<String>,
    pub goal: Option<String>,
    pub documents: Vec<DocumentSource>,
}

/// Parse a JSON manifest, either `{"name"?, "goal"?, "documents": [...]}` or
/// a bare array of documents. Errors name the offending field.
pub fn parse_manifest(json: &str) -> Result<Manifest, CorpusError> {
    let value: Value = serde_json::from_str(json)
        .map_err(|e| CorpusError::MalformedSource(format!("manifest is not valid JSON: {e}")))?;
    manifest_from_value(&value)
}

pub fn manifest_from_value(value: &Value) -> Result<Manifest, CorpusError> {
    let malformed = |msg: String| CorpusError::MalformedSource(msg);
    let (docs, name, goal) = match value {
        Value::Array(items) => (items, None, None),
        Value::Object(map) => {
            let docs = map
                .get("documents")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed("documents: expected an array".into()))?;
            let opt_str = |key: &str| -> Result<Option<String>, CorpusError> {
                match map.get(key) {
                    None | Some(Value::Null) => Ok(None),
                    Some(Value::String(s)) => Ok(Some(s.clone())),
                    Some(_) => Err(malformed(format!("{key}: expected a string"))),
                }
            };
            (docs, opt_str("name")?, opt_str("goal")?)
        }
        _ => return Err(malformed("manifest: expected an object or an array".into())),
    };
    let documents = docs
        .iter()
        .enumerate()
        .map(|(i, doc)| source_from_value(doc).map_err(|m| malformed(format!("documents[{i}].{m}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Manifest { name, goal, documents })
}

fn source_from_value(value: &Value) -> Result<DocumentSource, String> {
    let obj = value.as_object().ok_or("expected an object")?;
    let filename = obj
        .get("filename")
        .and_then(Value::as_str)
        .ok_or("filename: missing or not a string")?
        .to_string();
    if filename.trim().is_empty() {
        return Err("filename: must not be empty".into());
    }
    match (obj.get("text"), obj.get("elements")) {
        (Some(text), None) => {
            let text = text.as_str().ok_or("text: expected a string")?;
            Ok(DocumentSource::text(filename, text))
        }
        (None, Some(elements)) => {
            let items = elements.as_array().ok_or("elements: expected an array")?;
            if items.is_empty() {
                return Err("elements: must not be empty".into());
            }
            let elements = items
                .iter()
                .enumerate()
                .map(|(j, el)| {
                    let text = el
                        .get("text")
                        .and_then(Value::as_str)
                        .ok_or(format!("elements[{j}].text: missing or not a string"))?;
                    let page = el
                        .get("page")
                        .and_then(Value::as_u64)
                        .filter(|p| *p >= 1 && *p <= u32::MAX as u64)
                        .ok_or(format!("elements[{j}].page: expected an integer >= 1"))?;
                    Ok(SourceElement { text: text.to_string(), page: page as u32 })
                })
                .collect::<Result<Vec<_>, String>>()?;
            Ok(DocumentSource::elements(filename, elements))
        }
        (Some(_), Some(_)) => Err("expected exactly one of text or elements".into()),
        (None, None) => Err("text: missing (or provide elements)".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sentence_document() {
        let doc = ingest_document(DocumentSource::text("a.txt", "Hello world.")).unwrap();
        assert_eq!(doc.chunks.len(), 1);
        assert_eq!((doc.chunks[0].char_start, doc.chunks[0].char_end), (0, 12));
        assert_eq!(doc.chunks[0].page, None);
    }

    #[test]
    fn structured_pages_are_attributed() {
        let doc = ingest_document(DocumentSource::elements(
            "b.pdf",
            vec![
                SourceElement { text: "Page one text.".into(), page: 1 },
                SourceElement { text: "continues on page two.".into(), page: 2 },
            ],
        ))
        .unwrap();
        assert_eq!(doc.full_text, "Page one text.\ncontinues on page two.");
        let pages: Vec<_> = doc.chunks.iter().map(|c| c.page).collect();
        assert_eq!(pages, vec![Some(1), Some(2)]);
        assert_eq!(doc.chunks[1].index, 1);
        for c in &doc.chunks {
            assert_eq!(slice_chars(&doc.full_text, c.char_start, c.char_end).unwrap(), c.text);
        }
    }

    #[test]
    fn ingestion_errors() {
        assert_eq!(
            ingest_document(DocumentSource::text("a.txt", " \n ")),
            Err(CorpusError::EmptyDocument("a.txt".into()))
        );
        assert!(matches!(
            ingest_document(DocumentSource::elements("a", vec![])),
            Err(CorpusError::MalformedSource(_))
        ));
    }

    #[test]
    fn collection_preconditions() {
        assert_eq!(Collection::create("x", vec![], None), Err(CorpusError::NoDocuments));
        let dup = vec![DocumentSource::text("a", "One."), DocumentSource::text("a", "Two.")];
        assert_eq!(
            Collection::create("x", dup, None),
            Err(CorpusError::DuplicateFilename("a".into()))
        );
        let bad = vec![DocumentSource::text("a", "One."), DocumentSource::text("b", "  ")];
        assert_eq!(Collection::create("x", bad, None), Err(CorpusError::EmptyDocument("b".into())));
    }

    #[test]
    fn resolve_spans() {
        let col = Collection::create(
            "x",
            vec![DocumentSource::elements(
                "a",
                vec![
                    SourceElement { text: "First one. Second one.".into(), page: 3 },
                    SourceElement { text: "Third.".into(), page: 4 },
                ],
            )],
            None,
        )
        .unwrap();
        let doc = &col.documents[0];
        let c1 = &doc.chunks[1];
        assert_eq!(
            col.resolve_span(&doc.id, c1.char_start, c1.char_end).unwrap(),
            (c1.text.clone(), Some(3))
        );
        let (text, page) = col.resolve_span(&doc.id, 11, 29).unwrap();
        assert_eq!(text, "Second one.\nThird.");
        assert_eq!(page, Some(3));
        assert!(matches!(
            col.resolve_span(&doc.id, 0, 1000),
            Err(CorpusError::SpanOutOfRange { .. })
        ));
        assert!(matches!(col.resolve_span(&"nope".into(), 0, 1), Err(CorpusError::UnknownDocument(_))));
    }

    #[test]
    fn manifest_diagnostics() {
        let ok = parse_manifest(
            r#"{"name":"c","documents":[{"filename":"a","text":"Hi."},{"filename":"b","elements":[{"text":"X.","page":2}]}]}"#,
        )
        .unwrap();
        assert_eq!(ok.documents.len(), 2);
        assert_eq!(ok.name.as_deref(), Some("c"));
        let err = parse_manifest(r#"[{"filename":"a","elements":[{"page":1}]}]"#).unwrap_err();
        assert_eq!(
            err,
            CorpusError::MalformedSource("documents[0].elements[0].text: missing or not a string".into())
        );
        assert!(parse_manifest("{").is_err());
    }
}
