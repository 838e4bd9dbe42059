//! Collection-level question answering.
//!
//! 1. ask the strong model which attributes are still needed,
//! 2. search every scoped document for each attribute not already a column,
//! 3. merge the new columns with the existing ones into an evidence table,
//! 4. prompt the strong model with that table rendered as plain text,
//! 5. return the answer with the evidence.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::events::EventSink;
use super::{
    expect_kind, run_search_inner, ActionContext, ActionError, ActionEvent, ActionKind, ActionSpec, MatchMode,
    Phase, QueryPart, ResultCell, ResultRow, ResultTable,
};
use crate::corpus::DocId;
use crate::llm::{
    bindings, format_list, format_table, normalize_attribute, parse_attributes, render_prompt, ChatRequest,
    GatewayError, PromptKind,
};

/// A column the user already has, offered for reuse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExistingColumn {
    pub name: String,
    pub cells: HashMap<DocId, ResultCell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeUse {
    pub name: String,
    pub reused: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionAnswer {
    pub answer: String,
    pub evidence: ResultTable,
    pub attributes_used: Vec<AttributeUse>,
}

impl CollectionAnswer {
    /// Names of the attributes that were searched for this answer.
    pub fn new_attributes(&self) -> impl Iterator<Item = &str> {
        self.attributes_used.iter().filter(|a| !a.reused).map(|a| a.name.as_str())
    }
}

/// Split detected attributes into those matching an existing column and
/// those needing a search; duplicates collapse by normalized name.
pub fn partition_attributes(detected: &[String], existing: &[ExistingColumn]) -> (Vec<String>, Vec<String>) {
    let existing_norm: Vec<String> = existing.iter().map(|c| normalize_attribute(&c.name)).collect();
    let mut reused = Vec::new();
    let mut missing: Vec<String> = Vec::new();
    for attr in detected {
        let norm = normalize_attribute(attr);
        if norm.is_empty() {
            continue;
        }
        if let Some(i) = existing_norm.iter().position(|e| *e == norm) {
            if !reused.contains(&existing[i].name) {
                reused.push(existing[i].name.clone());
            }
        } else if !missing.iter().any(|m| normalize_attribute(m) == norm) {
            missing.push(attr.trim().to_string());
        }
    }
    (reused, missing)
}

pub(super) async fn run(
    ctx: &ActionContext,
    spec: &ActionSpec,
    existing: &[ExistingColumn],
    sink: Option<&EventSink>,
) -> Result<CollectionAnswer, ActionError> {
    expect_kind(spec, ActionKind::AskCollection)?;
    let docs = spec.scoped_documents(&ctx.collection)?;
    let question = spec.raw_query.trim().to_string();
    let phase = |phase: Phase, columns: Vec<String>| {
        if let Some(sink) = sink {
            sink.emit(ActionEvent::PhaseChanged { phase, columns });
        }
    };
    let existing_names: Vec<String> = existing.iter().map(|c| c.name.clone()).collect();

    phase(Phase::IdentifyAttributes, existing_names.clone());
    let detect_prompt = render_prompt(
        PromptKind::DetectAttributes,
        &bindings([
            ("Goal", ctx.goal()),
            ("Columns", format_list(&existing_names)),
            ("Question", question.clone()),
        ]),
    )?;
    let detect = ChatRequest::new(PromptKind::DetectAttributes, detect_prompt);
    let detected = match parse_attributes(&ctx.complete_text(&detect).await?) {
        Ok(a) => a,
        Err(_) => parse_attributes(&ctx.complete_text(&detect.reask()).await?).map_err(|e| {
            ActionError::Gateway(GatewayError::UnparseableResponse(format!("attribute detection failed: {e}")))
        })?,
    };
    let (_, missing) = partition_attributes(&detected, existing);

    phase(Phase::SearchMissingAttributes, missing.clone());
    let searched = if missing.is_empty() {
        ResultTable::default()
    } else {
        let parts = missing.iter().map(|m| QueryPart { text: m.clone(), mode: MatchMode::Semantic }).collect();
        run_search_inner(ctx, &docs, parts, sink).await
    };

    let mut columns = existing_names.clone();
    columns.extend(missing.iter().cloned());
    phase(Phase::UpdateTableSchema, columns.clone());
    let rows: Vec<ResultRow> = docs
        .iter()
        .map(|doc| {
            let mut cells: Vec<ResultCell> = existing
                .iter()
                .map(|col| col.cells.get(&doc.id).cloned().unwrap_or_else(ResultCell::not_found))
                .collect();
            if let Some(row) = searched.row(&doc.id) {
                cells.extend(row.cells.iter().cloned());
            }
            ResultRow { doc_id: doc.id.clone(), cells }
        })
        .collect();
    let evidence = ResultTable { columns: columns.clone(), rows };

    phase(Phase::PromptLlm, columns.clone());
    let mut header = vec!["Document".to_string()];
    header.extend(columns.iter().cloned());
    let table_rows: Vec<Vec<String>> = docs
        .iter()
        .zip(&evidence.rows)
        .map(|(doc, row)| {
            std::iter::once(doc.filename.clone())
                .chain(row.cells.iter().map(|c| c.display_text().to_string()))
                .collect()
        })
        .collect();
    let synth_prompt = render_prompt(
        PromptKind::Synthesize,
        &bindings([("Table", format_table(&header, &table_rows)), ("Question", question)]),
    )?;
    let answer = ctx.complete_text(&ChatRequest::new(PromptKind::Synthesize, synth_prompt)).await?;

    phase(Phase::DisplayResults, columns);
    let attributes_used = existing_names
        .into_iter()
        .map(|name| AttributeUse { name, reused: true })
        .chain(missing.into_iter().map(|name| AttributeUse { name, reused: false }))
        .collect();
    Ok(CollectionAnswer { answer: answer.trim().to_string(), evidence, attributes_used })
}
