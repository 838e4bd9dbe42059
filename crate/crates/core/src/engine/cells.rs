//! Result cells and snippet-to-span alignment.

use serde::{Deserialize, Serialize};

use crate::corpus::{resolve_in, DocId, Document};
use crate::index::LexicalMatch;
use crate::text::{normalize_whitespace, NormalizedText};

/// Cell text for a query that found nothing in a document.
pub const NOT_FOUND: &str = "\u{2014} not found \u{2014}";

/// Separator between snippets inside one cell.
pub const SNIPPET_SEPARATOR: &str = " \u{2026} ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellOrigin {
    Extracted,
    Generated,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultCell {
    pub text: String,
    pub spans: Vec<Span>,
    pub origin: CellOrigin,
    pub edited: bool,
    /// Set when model snippets could not be located verbatim in the document.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unaligned: bool,
}

impl ResultCell {
    pub fn not_found() -> Self {
        Self {
            text: NOT_FOUND.to_string(),
            spans: Vec::new(),
            origin: CellOrigin::Extracted,
            edited: false,
            unaligned: false,
        }
    }

    pub fn generated(text: impl Into<String>, spans: Vec<Span>) -> Self {
        Self { text: text.into(), spans, origin: CellOrigin::Generated, edited: false, unaligned: false }
    }

    pub fn error(message: impl Into<String>) -> Self {
        Self {
            text: message.into(),
            spans: Vec::new(),
            origin: CellOrigin::Error,
            edited: false,
            unaligned: false,
        }
    }

    pub fn is_not_found(&self) -> bool {
        self.text == NOT_FOUND && self.spans.is_empty()
    }

    /// Text to show another model: error cells contribute nothing.
    pub fn display_text(&self) -> &str {
        match self.origin {
            CellOrigin::Error => "",
            _ => &self.text,
        }
    }

    /// Check the verbatim guarantee of an extracted cell: its spans resolve,
    /// whitespace-normalized and joined, to exactly its text.
    pub fn verify_against(&self, doc: &Document) -> Result<(), String> {
        if self.origin != CellOrigin::Extracted || self.is_not_found() {
            return Ok(());
        }
        if self.spans.is_empty() {
            return Err("extracted cell without spans".into());
        }
        let resolved = self
            .spans
            .iter()
            .map(|s| resolve_in(doc, s.char_start, s.char_end).map(|(t, _)| normalize_whitespace(&t)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let joined = resolved.join(SNIPPET_SEPARATOR);
        if joined == self.text {
            Ok(())
        } else {
            Err(format!("span text {joined:?} differs from cell text {:?}", self.text))
        }
    }
}

/// Locate a snippet in the document, preferring occurrences that start
/// inside one of the `preferred` spans (the retrieved chunks).
pub fn align_snippet(norm: &NormalizedText, snippet: &str, preferred: &[Span]) -> Option<Span> {
    let needle: Vec<char> = normalize_whitespace(snippet).chars().collect();
    let hits = norm.find_all(&needle);
    let to_span = |pos: usize| {
        let (char_start, char_end) = norm.original_span(pos, needle.len());
        Span { char_start, char_end }
    };
    hits.iter()
        .map(|&pos| to_span(pos))
        .find(|span| preferred.iter().any(|p| p.char_start <= span.char_start && span.char_start < p.char_end))
        .or_else(|| hits.first().map(|&pos| to_span(pos)))
}

/// Build the cell for a semantic search from the model's snippets.
pub fn snippets_cell(doc: &Document, snippets: &[String], preferred: &[Span], max_snippets: usize) -> ResultCell {
    let mut kept: Vec<String> = Vec::new();
    for s in snippets.iter().map(|s| normalize_whitespace(s)) {
        if !s.is_empty() && !kept.contains(&s) {
            kept.push(s);
        }
    }
    kept.truncate(max_snippets);
    if kept.is_empty() {
        return ResultCell::not_found();
    }
    let norm = NormalizedText::new(&doc.full_text);
    let aligned: Vec<Option<Span>> = kept.iter().map(|s| align_snippet(&norm, s, preferred)).collect();
    let text = kept.join(SNIPPET_SEPARATOR);
    if aligned.iter().all(Option::is_some) {
        ResultCell {
            text,
            spans: aligned.into_iter().flatten().collect(),
            origin: CellOrigin::Extracted,
            edited: false,
            unaligned: false,
        }
    } else {
        tracing::debug!(doc = %doc.id, "snippet not found verbatim; downgrading cell");
        ResultCell {
            text,
            spans: aligned.into_iter().flatten().collect(),
            origin: CellOrigin::Generated,
            edited: false,
            unaligned: true,
        }
    }
}

/// Build the cell for a quoted (lexical) search from the matching chunks.
pub fn lexical_cell(matches: &[LexicalMatch], max_snippets: usize) -> ResultCell {
    if matches.is_empty() {
        return ResultCell::not_found();
    }
    let picked = &matches[..matches.len().min(max_snippets)];
    ResultCell {
        text: picked
            .iter()
            .map(|m| normalize_whitespace(&m.chunk.text))
            .collect::<Vec<_>>()
            .join(SNIPPET_SEPARATOR),
        spans: picked
            .iter()
            .map(|m| Span { char_start: m.chunk.char_start, char_end: m.chunk.char_end })
            .collect(),
        origin: CellOrigin::Extracted,
        edited: false,
        unaligned: false,
    }
}

/// One document's cells, in column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRow {
    pub doc_id: DocId,
    pub cells: Vec<ResultCell>,
}
