//! Action execution: Search, Ask over each document, Ask over the
//! collection and Summarize, run per document with bounded concurrency.

mod cells;
mod collection;
mod events;
mod query;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use futures::future::{BoxFuture, FutureExt};
use futures::stream::{BoxStream, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::mpsc;

use crate::corpus::{Collection, DocId, Document};
use crate::index::{lexical_find, EmbeddingProvider, EmbeddingVector, IndexError, IndexKey, VectorIndex, DEFAULT_TOP_K};
use crate::llm::{
    bindings, format_context, parse_snippets, render_prompt, ChatRequest, FinishReason, Gateway, GatewayError,
    PromptKind, ASK_DOC_EXAMPLES,
};

pub use cells::{
    align_snippet, lexical_cell, snippets_cell, CellOrigin, ResultCell, ResultRow, Span, NOT_FOUND,
    SNIPPET_SEPARATOR,
};
pub use collection::{AttributeUse, CollectionAnswer, ExistingColumn};
pub use events::{ActionEvent, EventEnvelope, Phase};
pub use query::{parse_query, MatchMode, ParsedQuery, QueryPart};

use events::EventSink;

pub const DEFAULT_FANOUT: usize = 8;
pub const DEFAULT_MAX_SNIPPETS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("invalid scope: {0}")]
    InvalidScope(String),
    #[error("action kind {0:?} cannot run here")]
    WrongKind(ActionKind),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Search,
    AskEach,
    AskCollection,
    Summarize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    AllDocuments,
    Documents(Vec<DocId>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionSpec {
    pub kind: ActionKind,
    pub raw_query: String,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimensions: Option<String>,
}

impl ActionSpec {
    pub fn new(kind: ActionKind, raw_query: impl Into<String>) -> Self {
        Self { kind, raw_query: raw_query.into(), scope: Scope::AllDocuments, dimensions: None }
    }

    pub fn search(query: impl Into<String>) -> Self {
        Self::new(ActionKind::Search, query)
    }

    pub fn ask_each(question: impl Into<String>) -> Self {
        Self::new(ActionKind::AskEach, question)
    }

    pub fn ask_collection(question: impl Into<String>) -> Self {
        Self::new(ActionKind::AskCollection, question)
    }

    pub fn summarize(dimensions: Option<String>) -> Self {
        Self { dimensions, ..Self::new(ActionKind::Summarize, "") }
    }

    pub fn with_scope(mut self, docs: Vec<DocId>) -> Self {
        self.scope = Scope::Documents(docs);
        self
    }

    /// Scoped documents in collection order, after checking the query.
    pub fn scoped_documents<'a>(&self, collection: &'a Collection) -> Result<Vec<&'a Document>, ActionError> {
        if self.kind != ActionKind::Summarize && self.raw_query.trim().is_empty() {
            return Err(ActionError::EmptyQuery);
        }
        match &self.scope {
            Scope::AllDocuments => Ok(collection.documents.iter().collect()),
            Scope::Documents(ids) => {
                if ids.is_empty() {
                    return Err(ActionError::InvalidScope("scope lists no documents".into()));
                }
                if let Some(unknown) = ids.iter().find(|id| collection.position(id).is_none()) {
                    return Err(ActionError::InvalidScope(format!("{unknown} is not in the collection")));
                }
                Ok(collection.documents.iter().filter(|d| ids.contains(&d.id)).collect())
            }
        }
    }

    /// Column labels this action produces up front.
    pub fn columns(&self) -> Result<Vec<String>, ActionError> {
        Ok(match self.kind {
            ActionKind::Search => parse_query(&self.raw_query)?.parts.into_iter().map(|p| p.text).collect(),
            ActionKind::AskEach => vec![self.raw_query.trim().to_string()],
            ActionKind::Summarize => vec![match self.dimensions.as_deref().map(str::trim) {
                Some(d) if !d.is_empty() => format!("Summary ({d})"),
                _ => "Summary".to_string(),
            }],
            ActionKind::AskCollection => Vec::new(),
        })
    }
}

/// Rows are documents (collection order), columns are query labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn row(&self, doc_id: &DocId) -> Option<&ResultRow> {
        self.rows.iter().find(|r| &r.doc_id == doc_id)
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == label)
    }

    /// Every extracted cell checked with [`ResultCell::verify_against`].
    pub fn verify(&self, collection: &Collection) -> Result<(), String> {
        for row in &self.rows {
            let doc = collection.document(&row.doc_id).map_err(|e| e.to_string())?;
            for cell in &row.cells {
                cell.verify_against(doc)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionOutput {
    Table(ResultTable),
    Answer(CollectionAnswer),
}

impl ActionOutput {
    pub fn table(&self) -> &ResultTable {
        match self {
            ActionOutput::Table(t) => t,
            ActionOutput::Answer(a) => &a.evidence,
        }
    }

    pub fn table_mut(&mut self) -> &mut ResultTable {
        match self {
            ActionOutput::Table(t) => t,
            ActionOutput::Answer(a) => &mut a.evidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub fanout: usize,
    pub top_k: usize,
    pub max_snippets: usize,
    pub whole_word: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { fanout: DEFAULT_FANOUT, top_k: DEFAULT_TOP_K, max_snippets: DEFAULT_MAX_SNIPPETS, whole_word: false }
    }
}

/// Everything an action needs: an immutable collection and its index, the
/// embedder that built the index, and the model gateway.
#[derive(Clone)]
pub struct ActionContext {
    pub collection: Arc<Collection>,
    pub index: Arc<VectorIndex>,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub gateway: Arc<Gateway>,
    pub config: EngineConfig,
    /// Goal used by collection QA; falls back to the collection's goal.
    pub goal: Option<String>,
}

impl ActionContext {
    pub fn new(
        collection: Arc<Collection>,
        index: Arc<VectorIndex>,
        embedder: Arc<dyn EmbeddingProvider>,
        gateway: Arc<Gateway>,
    ) -> Self {
        Self { collection, index, embedder, gateway, config: EngineConfig::default(), goal: None }
    }

    pub fn with_config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_goal(mut self, goal: Option<String>) -> Self {
        self.goal = goal;
        self
    }

    fn goal(&self) -> String {
        self.goal.clone().or_else(|| self.collection.goal.clone()).unwrap_or_default()
    }

    async fn embed_query(&self, text: &str) -> Result<EmbeddingVector, IndexError> {
        if self.embedder.provider_id() != self.index.provider_id {
            return Err(IndexError::ProviderMismatch {
                index: self.index.provider_id.clone(),
                active: self.embedder.provider_id().to_string(),
            });
        }
        self.embedder.embed(text).await
    }

    /// Retrieved chunks for one document, sorted back into document order.
    fn context_chunks<'d>(
        &self,
        doc: &'d Document,
        query: &EmbeddingVector,
    ) -> Result<Vec<&'d crate::corpus::Chunk>, IndexError> {
        let mut idx: Vec<usize> = self
            .index
            .topk_by_vector(&doc.id, query, self.config.top_k)?
            .into_iter()
            .map(|h| h.chunk_index)
            .collect();
        idx.sort_unstable();
        Ok(idx.into_iter().filter_map(|i| doc.chunks.get(i)).collect())
    }

    /// Complete once, retrying a single time if the backend fails.
    async fn complete_text(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let mut last = None;
        for _ in 0..2 {
            match self.gateway.complete(request).await {
                Ok(resp) if resp.finish != FinishReason::Error => return Ok(resp.text),
                Ok(_) => last = Some(GatewayError::BackendUnavailable("stream interrupted".into())),
                Err(err @ GatewayError::BackendUnavailable(_)) => last = Some(err),
                Err(err) => return Err(err),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// Complete and parse, re-asking once on a malformed reply.
    async fn complete_snippets(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
        let first = self.complete_text(request).await?;
        match parse_snippets(&first) {
            Ok(s) => Ok(s),
            Err(_) => parse_snippets(&self.complete_text(&request.reask()).await?),
        }
    }
}

fn spans_of(chunks: &[&crate::corpus::Chunk]) -> Vec<Span> {
    chunks.iter().map(|c| Span { char_start: c.char_start, char_end: c.char_end }).collect()
}

/// Per-part search state shared by every document row.
struct PreparedPart {
    part: QueryPart,
    vector: Option<Result<EmbeddingVector, IndexError>>,
}

async fn prepare_parts(ctx: &ActionContext, parts: Vec<QueryPart>) -> Vec<PreparedPart> {
    let mut out = Vec::with_capacity(parts.len());
    for part in parts {
        let vector = match part.mode {
            MatchMode::Lexical => None,
            MatchMode::Semantic => Some(ctx.embed_query(&part.text).await),
        };
        out.push(PreparedPart { part, vector });
    }
    out
}

async fn search_cell(ctx: &ActionContext, doc: &Document, prepared: &PreparedPart) -> ResultCell {
    let max = ctx.config.max_snippets;
    let vector = match &prepared.vector {
        None => return lexical_cell(&lexical_find(doc, &prepared.part.text, ctx.config.whole_word), max),
        Some(Err(err)) => return ResultCell::error(err.to_string()),
        Some(Ok(v)) => v,
    };
    let chunks = match ctx.context_chunks(doc, vector) {
        Ok(c) => c,
        Err(err) => return ResultCell::error(err.to_string()),
    };
    let prompt = render_prompt(
        PromptKind::Search,
        &bindings([
            ("Context", format_context(chunks.iter().map(|c| c.text.as_str()))),
            ("Query", prepared.part.text.clone()),
        ]),
    );
    let request = match prompt {
        Ok(p) => ChatRequest::new(PromptKind::Search, p),
        Err(err) => return ResultCell::error(err.to_string()),
    };
    match ctx.complete_snippets(&request).await {
        Ok(snippets) => snippets_cell(doc, &snippets, &spans_of(&chunks), max),
        Err(err) => ResultCell::error(err.to_string()),
    }
}

async fn search_row(ctx: &ActionContext, doc: &Document, parts: &[PreparedPart]) -> ResultRow {
    let cells = futures::future::join_all(parts.iter().map(|p| search_cell(ctx, doc, p))).await;
    ResultRow { doc_id: doc.id.clone(), cells }
}

async fn ask_row(ctx: &ActionContext, doc: &Document, question: &str, chunks: Result<Vec<&crate::corpus::Chunk>, IndexError>) -> ResultRow {
    let cell = async {
        let chunks = chunks.map_err(|e| e.to_string())?;
        let prompt = render_prompt(
            PromptKind::AskDoc,
            &bindings([
                ("Examples", ASK_DOC_EXAMPLES.to_string()),
                ("Context", format_context(chunks.iter().map(|c| c.text.as_str()))),
                ("Question", question.to_string()),
            ]),
        )
        .map_err(|e| e.to_string())?;
        let answer = ctx
            .complete_text(&ChatRequest::new(PromptKind::AskDoc, prompt))
            .await
            .map_err(|e| e.to_string())?;
        Ok::<_, String>(ResultCell::generated(answer.trim(), spans_of(&chunks)))
    }
    .await
    .unwrap_or_else(ResultCell::error);
    ResultRow { doc_id: doc.id.clone(), cells: vec![cell] }
}

/// Question sent through the per-document ask prompt for Summarize.
pub fn summary_question(dimensions: Option<&str>) -> String {
    match dimensions.map(str::trim) {
        Some(d) if !d.is_empty() => {
            format!("Write a short summary of this document, focusing on the following dimensions: {d}")
        }
        _ => "Write a short summary of this document.".to_string(),
    }
}

/// Run `row_for` over `docs` with at most `fanout` rows in flight, emitting
/// each row as it finishes, and return the rows in collection order.
async fn run_rows<'a>(
    ctx: &ActionContext,
    docs: &[&'a Document],
    sink: Option<&EventSink>,
    row_for: impl Fn(&'a Document) -> BoxFuture<'a, ResultRow>,
) -> Vec<ResultRow> {
    let futures: Vec<BoxFuture<'a, ResultRow>> = docs.iter().map(|d| row_for(d)).collect();
    let mut pending = futures::stream::iter(futures).buffer_unordered(ctx.config.fanout.max(1));
    let mut rows = Vec::with_capacity(docs.len());
    while let Some(row) = pending.next().await {
        if let Some(sink) = sink {
            sink.emit(ActionEvent::RowCompleted { doc_id: row.doc_id.clone(), cells: row.cells.clone() });
        }
        rows.push(row);
    }
    rows.sort_by_key(|r| ctx.collection.position(&r.doc_id));
    rows
}

async fn run_search_inner(
    ctx: &ActionContext,
    docs: &[&Document],
    parts: Vec<QueryPart>,
    sink: Option<&EventSink>,
) -> ResultTable {
    let columns = parts.iter().map(|p| p.text.clone()).collect();
    let prepared = prepare_parts(ctx, parts).await;
    let rows = run_rows(ctx, docs, sink, |doc| search_row(ctx, doc, &prepared).boxed()).await;
    ResultTable { columns, rows }
}

fn expect_kind(spec: &ActionSpec, kind: ActionKind) -> Result<(), ActionError> {
    if spec.kind == kind {
        Ok(())
    } else {
        Err(ActionError::WrongKind(spec.kind))
    }
}

pub async fn run_search(ctx: &ActionContext, spec: &ActionSpec) -> Result<ResultTable, ActionError> {
    search_with(ctx, spec, None).await
}

async fn search_with(ctx: &ActionContext, spec: &ActionSpec, sink: Option<&EventSink>) -> Result<ResultTable, ActionError> {
    expect_kind(spec, ActionKind::Search)?;
    let docs = spec.scoped_documents(&ctx.collection)?;
    let parts = parse_query(&spec.raw_query)?.parts;
    Ok(run_search_inner(ctx, &docs, parts, sink).await)
}

pub async fn run_ask_each(ctx: &ActionContext, spec: &ActionSpec) -> Result<ResultTable, ActionError> {
    ask_each_with(ctx, spec, None).await
}

async fn ask_each_with(ctx: &ActionContext, spec: &ActionSpec, sink: Option<&EventSink>) -> Result<ResultTable, ActionError> {
    expect_kind(spec, ActionKind::AskEach)?;
    let docs = spec.scoped_documents(&ctx.collection)?;
    let question = spec.raw_query.trim().to_string();
    let vector = ctx.embed_query(&question).await;
    let rows = run_rows(ctx, &docs, sink, |doc| {
        let chunks = vector.clone().and_then(|v| ctx.context_chunks(doc, &v));
        ask_row(ctx, doc, &question, chunks).boxed()
    })
    .await;
    Ok(ResultTable { columns: spec.columns()?, rows })
}

pub async fn run_summarize(ctx: &ActionContext, spec: &ActionSpec) -> Result<ResultTable, ActionError> {
    summarize_with(ctx, spec, None).await
}

async fn summarize_with(ctx: &ActionContext, spec: &ActionSpec, sink: Option<&EventSink>) -> Result<ResultTable, ActionError> {
    expect_kind(spec, ActionKind::Summarize)?;
    let docs = spec.scoped_documents(&ctx.collection)?;
    let dimensions = spec.dimensions.as_deref().map(str::trim).filter(|d| !d.is_empty());
    let question = summary_question(dimensions);
    let vector = match dimensions {
        Some(d) => Some(ctx.embed_query(d).await),
        None => None,
    };
    let rows = run_rows(ctx, &docs, sink, |doc| {
        let chunks = match &vector {
            Some(v) => v.clone().and_then(|v| ctx.context_chunks(doc, &v)),
            None => Ok(doc.chunks.iter().take(ctx.config.top_k).collect()),
        };
        ask_row(ctx, doc, &question, chunks).boxed()
    })
    .await;
    Ok(ResultTable { columns: spec.columns()?, rows })
}

pub async fn run_ask_collection(
    ctx: &ActionContext,
    spec: &ActionSpec,
    existing: &[ExistingColumn],
) -> Result<CollectionAnswer, ActionError> {
    collection::run(ctx, spec, existing, None).await
}

/// Run any action to completion without streaming.
pub async fn run_action(
    ctx: &ActionContext,
    spec: &ActionSpec,
    existing: &[ExistingColumn],
) -> Result<ActionOutput, ActionError> {
    dispatch(ctx, spec, existing, None).await
}

async fn dispatch(
    ctx: &ActionContext,
    spec: &ActionSpec,
    existing: &[ExistingColumn],
    sink: Option<&EventSink>,
) -> Result<ActionOutput, ActionError> {
    Ok(match spec.kind {
        ActionKind::Search => ActionOutput::Table(search_with(ctx, spec, sink).await?),
        ActionKind::AskEach => ActionOutput::Table(ask_each_with(ctx, spec, sink).await?),
        ActionKind::Summarize => ActionOutput::Table(summarize_with(ctx, spec, sink).await?),
        ActionKind::AskCollection => ActionOutput::Answer(collection::run(ctx, spec, existing, sink).await?),
    })
}

/// Execute an action in the background and stream its events. The stream
/// ends after `ActionCompleted` or `ActionFailed`.
pub fn execute(
    ctx: ActionContext,
    spec: ActionSpec,
    existing: Vec<ExistingColumn>,
) -> (String, BoxStream<'static, EventEnvelope>) {
    let action_id = format!("act-{}", uuid::Uuid::new_v4().simple());
    let (tx, mut rx) = mpsc::unbounded_channel();
    let sink = EventSink::new(action_id.clone(), tx);
    tokio::spawn(async move {
        let columns = match spec.columns() {
            Ok(c) => c,
            Err(err) => {
                sink.emit(ActionEvent::ActionFailed { diagnostic: err.to_string() });
                return;
            }
        };
        sink.emit(ActionEvent::ActionStarted { columns });
        match dispatch(&ctx, &spec, &existing, Some(&sink)).await {
            Ok(output) => sink.emit(ActionEvent::ActionCompleted(output)),
            Err(err) => sink.emit(ActionEvent::ActionFailed { diagnostic: err.to_string() }),
        }
    });
    let stream = futures::stream::poll_fn(move |cx| rx.poll_recv(cx));
    (action_id, Box::pin(stream))
}

/// Action outputs cached per index; a different provider or index content
/// misses, forcing re-execution.
#[derive(Default)]
pub struct ResultCache {
    entries: Mutex<HashMap<(IndexKey, ActionSpec), ActionOutput>>,
}

impl ResultCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &IndexKey, spec: &ActionSpec) -> Option<ActionOutput> {
        self.entries.lock().expect("cache lock").get(&(key.clone(), spec.clone())).cloned()
    }

    pub fn insert(&self, key: IndexKey, spec: ActionSpec, output: ActionOutput) {
        self.entries.lock().expect("cache lock").insert((key, spec), output);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
