//! Prompt templates and placeholder rendering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::text::normalize_whitespace;

pub const SEARCH_TEMPLATE: &str = include_str!("../../templates/search.txt");
pub const ASK_DOC_TEMPLATE: &str = include_str!("../../templates/ask_doc.txt");
pub const DETECT_TEMPLATE: &str = include_str!("../../templates/detect_attributes.txt");
pub const SYNTHESIZE_TEMPLATE: &str = include_str!("../../templates/synthesize.txt");
pub const SUGGESTIONS_TEMPLATE: &str = include_str!("../../templates/suggestions.txt");

/// Demonstrations bound to `{Examples}` in the per-document ask prompt.
pub const ASK_DOC_EXAMPLES: &str = include_str!("../../templates/ask_doc_examples.txt");
pub const ASK_DOC_EXAMPLES_VERSION: u32 = 1;

/// Appended to a prompt when its first response could not be parsed.
pub const REASK_SUFFIX: &str = "\n\nRespond with only the JSON object.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Search,
    AskDoc,
    DetectAttributes,
    Synthesize,
    Suggestions,
}

impl PromptKind {
    pub const ALL: [PromptKind; 5] = [
        PromptKind::Search,
        PromptKind::AskDoc,
        PromptKind::DetectAttributes,
        PromptKind::Synthesize,
        PromptKind::Suggestions,
    ];

    pub fn template(self) -> &'static str {
        match self {
            PromptKind::Search => SEARCH_TEMPLATE,
            PromptKind::AskDoc => ASK_DOC_TEMPLATE,
            PromptKind::DetectAttributes => DETECT_TEMPLATE,
            PromptKind::Synthesize => SYNTHESIZE_TEMPLATE,
            PromptKind::Suggestions => SUGGESTIONS_TEMPLATE,
        }
    }

    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            PromptKind::Search => &["Context", "Query"],
            PromptKind::AskDoc => &["Examples", "Context", "Question"],
            PromptKind::DetectAttributes => &["Goal", "Columns", "Question"],
            PromptKind::Synthesize => &["Table", "Question"],
            PromptKind::Suggestions => &["Goal", "Samples", "Searches", "Questions"],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Search => "search",
            PromptKind::AskDoc => "ask_doc",
            PromptKind::DetectAttributes => "detect_attributes",
            PromptKind::Synthesize => "synthesize",
            PromptKind::Suggestions => "suggestions",
        }
    }
}

pub type Bindings = BTreeMap<String, String>;

/// Build a [`Bindings`] map from `(name, value)` pairs.
pub fn bindings<const N: usize>(pairs: [(&str, String); N]) -> Bindings {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Substitute every `{Name}` placeholder of `kind`'s template in one pass.
/// Bound values are inserted verbatim and never re-scanned.
pub fn render_prompt(kind: PromptKind, values: &Bindings) -> Result<String, GatewayError> {
    for name in kind.placeholders() {
        if !values.contains_key(*name) {
            return Err(GatewayError::MissingBinding { kind, name: (*name).to_string() });
        }
    }
    let template = kind.template();
    let mut out = String::with_capacity(template.len() + values.values().map(String::len).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if kind.placeholders().contains(&&after[..close]) => {
                out.push_str(&values[&after[..close]]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Retrieved chunk texts, already in document order, one per line.
pub fn format_context<'a>(chunks: impl IntoIterator<Item = &'a str>) -> String {
    chunks.into_iter().collect::<Vec<_>>().join("\n")
}

/// A list of strings as a JSON array, e.g. `["payment terms"]`.
pub fn format_list<S: AsRef<str>>(items: &[S]) -> String {
    serde_json::to_string(&items.iter().map(AsRef::as_ref).collect::<Vec<_>>())
        .expect("string list serializes")
}

/// One `Sample document: ...` line per sample.
pub fn format_samples<S: AsRef<str>>(samples: &[S]) -> String {
    samples
        .iter()
        .map(|s| format!("Sample document: {}", s.as_ref()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Plain-text table: a header line then one line per row, cells separated
/// by ` | ` with whitespace collapsed. No columns or no rows renders empty.
pub fn format_table<S: AsRef<str>>(header: &[S], rows: &[Vec<String>]) -> String {
    if header.len() <= 1 || rows.is_empty() {
        return String::new();
    }
    let line = |cells: Vec<String>| cells.join(" | ");
    let mut lines = vec![line(header.iter().map(|h| normalize_whitespace(h.as_ref())).collect())];
    lines.extend(rows.iter().map(|r| line(r.iter().map(|c| normalize_whitespace(c)).collect())));
    lines.join("\n")
}
