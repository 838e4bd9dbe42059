//! Operations shared by the HTTP API and the CLI.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use forage_core::corpus::{manifest_from_value, Collection, CollectionId, CorpusError, DocId};
use forage_core::engine::{
    self, ActionContext, ActionError, ActionEvent, ActionOutput, ActionSpec, EngineConfig, EventEnvelope,
};
use forage_core::index::{
    EmbeddingProvider, HashingEmbedder, IndexError, RemoteEmbedder, VectorIndex, DEFAULT_EMBED_FANOUT,
};
use forage_core::llm::{heuristic_response, Gateway, LlmBackend, MockBackend, RemoteBackend};
use forage_core::notebook::{CellCommand, CellId, Notebook, NotebookError, NotebookId, ResultEdit};
use forage_core::store::{Store, StoreError};
use forage_core::suggestions::{self, SuggestionItem};
use forage_core::table::{self, AggregateTable, TableError};
use futures::stream::BoxStream;
use futures::StreamExt;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;
use tokio::sync::{mpsc, Notify};

use crate::config::{ApiConfig, EmbeddingChoice, LlmChoice};

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Notebook(#[from] NotebookError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Backend(String),
}

pub type Result<T, E = WorkspaceError> = std::result::Result<T, E>;

/// A document's text and, when asked for, one resolved span of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentView {
    pub doc_id: DocId,
    pub collection_id: CollectionId,
    pub filename: String,
    pub text: String,
    pub span: Option<SpanView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanView {
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
    pub page: Option<u32>,
}

#[derive(Default)]
struct Inflight {
    count: AtomicUsize,
    idle: Notify,
}

struct InflightGuard(Arc<Inflight>);

impl Drop for InflightGuard {
    fn drop(&mut self) {
        if self.0.count.fetch_sub(1, Ordering::SeqCst) == 1 {
            self.0.idle.notify_waiters();
        }
    }
}

type Loaded = (Arc<Collection>, Arc<VectorIndex>);

pub struct Workspace {
    store: Store,
    gateway: Arc<Gateway>,
    embedder: Arc<dyn EmbeddingProvider>,
    engine: EngineConfig,
    auto_suggest: bool,
    collections: Mutex<HashMap<CollectionId, Loaded>>,
    notebook_locks: Mutex<HashMap<NotebookId, Arc<tokio::sync::Mutex<()>>>>,
    inflight: Arc<Inflight>,
}

impl Workspace {
    pub fn new(store: Store, gateway: Arc<Gateway>, embedder: Arc<dyn EmbeddingProvider>, engine: EngineConfig) -> Self {
        Self {
            store,
            gateway,
            embedder,
            engine,
            auto_suggest: false,
            collections: Mutex::new(HashMap::new()),
            notebook_locks: Mutex::new(HashMap::new()),
            inflight: Arc::default(),
        }
    }

    pub fn from_config(config: &ApiConfig) -> Result<Self> {
        let backend: Arc<dyn LlmBackend> = match &config.llm {
            LlmChoice::Remote(remote) => Arc::new(RemoteBackend::new(remote.clone())),
            LlmChoice::Mock { fixtures: Some(dir) } => Arc::new(
                MockBackend::from_dir(dir)
                    .map_err(|e| WorkspaceError::Backend(format!("mock fixtures {}: {e}", dir.display())))?
                    .with_responder(heuristic_response),
            ),
            LlmChoice::Mock { fixtures: None } => Arc::new(MockBackend::heuristic()),
        };
        let embedder: Arc<dyn EmbeddingProvider> = match &config.embedding {
            EmbeddingChoice::Local => Arc::new(HashingEmbedder::new()),
            EmbeddingChoice::Remote(remote) => Arc::new(RemoteEmbedder::new(remote.clone())),
        };
        let engine = EngineConfig { fanout: config.fanout, ..EngineConfig::default() };
        Ok(Self::new(
            Store::open(&config.data_dir)?,
            Arc::new(Gateway::new(backend, config.models.clone())),
            embedder,
            engine,
        ))
    }

    /// Generate suggestions in the background when notebooks are created
    /// and after each executed action.
    pub fn with_auto_suggest(mut self, on: bool) -> Self {
        self.auto_suggest = on;
        self
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn data_dir(&self) -> &Path {
        self.store.root()
    }

    fn track(&self) -> InflightGuard {
        self.inflight.count.fetch_add(1, Ordering::SeqCst);
        InflightGuard(self.inflight.clone())
    }

    /// Wait until no action or suggestion task is running.
    pub async fn drain(&self) {
        loop {
            let idle = self.inflight.idle.notified();
            if self.inflight.count.load(Ordering::SeqCst) == 0 {
                return;
            }
            idle.await;
        }
    }

    // --- collections ---

    /// Ingest a manifest, build its index and persist both. `name` and
    /// `goal` override the manifest's own values.
    pub async fn ingest(&self, manifest: &Value, name: Option<String>, goal: Option<String>) -> Result<Collection> {
        let manifest = manifest_from_value(manifest)?;
        let name = name.or(manifest.name).unwrap_or_else(|| "untitled".to_string());
        let goal = goal.or(manifest.goal);
        let collection = Collection::create(name, manifest.documents, goal)?;
        let index = VectorIndex::build(&collection, self.embedder.as_ref(), DEFAULT_EMBED_FANOUT).await?;
        self.store.save_collection(&collection)?;
        self.store.save_index(&index)?;
        self.collections
            .lock()
            .expect("collections lock")
            .insert(collection.id.clone(), (Arc::new(collection.clone()), Arc::new(index)));
        Ok(collection)
    }

    /// The collection and an index built by the active embedder; a stale
    /// index from another provider is rebuilt and saved.
    pub async fn load(&self, id: &CollectionId) -> Result<Loaded> {
        if let Some(hit) = self.collections.lock().expect("collections lock").get(id) {
            return Ok(hit.clone());
        }
        let collection = self.store.load_collection(id)?;
        let index = match self.store.load_index(id) {
            Ok(index) if index.provider_id == self.embedder.provider_id() => index,
            Ok(_) | Err(StoreError::NotFound { .. }) => {
                tracing::info!(collection = %id, "building index");
                let index = VectorIndex::build(&collection, self.embedder.as_ref(), DEFAULT_EMBED_FANOUT).await?;
                self.store.save_index(&index)?;
                index
            }
            Err(e) => return Err(e.into()),
        };
        let loaded = (Arc::new(collection), Arc::new(index));
        self.collections.lock().expect("collections lock").insert(id.clone(), loaded.clone());
        Ok(loaded)
    }

    pub async fn collection(&self, id: &CollectionId) -> Result<Arc<Collection>> {
        Ok(self.load(id).await?.0)
    }

    pub async fn context(&self, id: &CollectionId, goal: Option<String>) -> Result<ActionContext> {
        let (collection, index) = self.load(id).await?;
        Ok(ActionContext::new(collection, index, self.embedder.clone(), self.gateway.clone())
            .with_config(self.engine.clone())
            .with_goal(goal))
    }

    pub async fn document(&self, doc_id: &DocId, span: Option<(usize, usize)>) -> Result<DocumentView> {
        for cid in self.store.list_collections()? {
            let collection = self.collection(&cid).await?;
            let Ok(doc) = collection.document(doc_id) else { continue };
            let span = match span {
                Some((start, end)) => {
                    let (text, page) = collection.resolve_span(doc_id, start, end)?;
                    Some(SpanView { char_start: start, char_end: end, text, page })
                }
                None => None,
            };
            return Ok(DocumentView {
                doc_id: doc.id.clone(),
                collection_id: cid,
                filename: doc.filename.clone(),
                text: doc.full_text.clone(),
                span,
            });
        }
        Err(WorkspaceError::NotFound(format!("document {doc_id} not found")))
    }

    /// Run an action outside any notebook.
    pub async fn run_direct(&self, collection: &CollectionId, spec: &ActionSpec) -> Result<ActionOutput> {
        let ctx = self.context(collection, None).await?;
        Ok(engine::run_action(&ctx, spec, &[]).await?)
    }

    // --- notebooks ---

    fn lock_for(&self, id: &NotebookId) -> Arc<tokio::sync::Mutex<()>> {
        self.notebook_locks.lock().expect("lock table").entry(id.clone()).or_default().clone()
    }

    /// Load, mutate and save a notebook under its writer lock.
    pub async fn with_notebook<T>(
        &self,
        id: &NotebookId,
        f: impl FnOnce(&mut Notebook) -> Result<T>,
    ) -> Result<(T, Notebook)> {
        let lock = self.lock_for(id);
        let _guard = lock.lock().await;
        let mut notebook = self.store.load_notebook(id)?;
        let out = f(&mut notebook)?;
        self.store.save_notebook(&notebook)?;
        Ok((out, notebook))
    }

    pub fn notebook(&self, id: &NotebookId) -> Result<Notebook> {
        Ok(self.store.load_notebook(id)?)
    }

    pub async fn create_notebook(self: &Arc<Self>, collection: &CollectionId, goal: Option<String>) -> Result<Notebook> {
        let c = self.collection(collection).await?;
        let notebook = Notebook::new(collection.clone(), goal.or_else(|| c.goal.clone()));
        self.store.save_notebook(&notebook)?;
        if self.auto_suggest {
            self.spawn_suggestions(notebook.id.clone());
        }
        Ok(notebook)
    }

    pub async fn apply(&self, id: &NotebookId, command: CellCommand) -> Result<(CellId, Notebook)> {
        self.with_notebook(id, |nb| Ok(nb.apply(command)?)).await
    }

    pub async fn edit(
        &self,
        id: &NotebookId,
        cell: &CellId,
        doc: &DocId,
        column: &str,
        edit: ResultEdit,
    ) -> Result<Notebook> {
        Ok(self.with_notebook(id, |nb| Ok(nb.edit_result(cell, doc, column, edit)?)).await?.1)
    }

    pub async fn accept(&self, id: &NotebookId, cell: &CellId, item: SuggestionItem) -> Result<(CellId, Notebook)> {
        self.with_notebook(id, |nb| Ok(suggestions::accept(nb, cell, item)?)).await
    }

    pub async fn dismiss(&self, id: &NotebookId, cell: &CellId) -> Result<Notebook> {
        Ok(self.with_notebook(id, |nb| Ok(suggestions::dismiss(nb, cell)?)).await?.1)
    }

    pub async fn table(
        &self,
        id: &NotebookId,
        columns: Option<&[String]>,
        order: Option<&[String]>,
    ) -> Result<AggregateTable> {
        let notebook = self.notebook(id)?;
        let collection = self.collection(&notebook.collection_id).await?;
        Ok(table::rebuild(&notebook, &collection).view(columns, order)?)
    }

    /// The notebook holding `cell`.
    pub fn notebook_of(&self, cell: &CellId) -> Result<NotebookId> {
        for id in self.store.list_notebooks()? {
            if self.store.load_notebook(&id)?.cell(cell).is_ok() {
                return Ok(id);
            }
        }
        Err(WorkspaceError::Notebook(NotebookError::UnknownCell(cell.clone())))
    }

    /// Execute an action cell. Events stream as they happen; the outcome is
    /// saved to the notebook before the terminal event is delivered. The
    /// action runs to completion even if the stream is dropped.
    pub async fn execute_cell(self: &Arc<Self>, cell: &CellId) -> Result<(String, BoxStream<'static, EventEnvelope>)> {
        let nb_id = self.notebook_of(cell)?;
        let (spec, goal, existing, collection_id) = {
            let lock = self.lock_for(&nb_id);
            let _guard = lock.lock().await;
            let mut notebook = self.store.load_notebook(&nb_id)?;
            let spec = notebook.begin_execution(cell)?;
            let collection = self.collection(&notebook.collection_id).await?;
            let existing = table::rebuild(&notebook, &collection).existing_columns();
            (spec, notebook.goal.clone(), existing, notebook.collection_id.clone())
        };
        let ctx = self.context(&collection_id, goal).await?;
        let index_key = ctx.index.key();
        let guard = self.track();
        let (action_id, mut events) = engine::execute(ctx, spec, existing);
        let (tx, rx) = mpsc::unbounded_channel();
        let this = self.clone();
        let cell = cell.clone();
        tokio::spawn(async move {
            let _guard = guard;
            while let Some(envelope) = events.next().await {
                let outcome = match &envelope.event {
                    ActionEvent::ActionCompleted(out) => Some(Ok(out.clone())),
                    ActionEvent::ActionFailed { diagnostic } => Some(Err(diagnostic.clone())),
                    _ => None,
                };
                if let Some(outcome) = outcome {
                    let key = outcome.is_ok().then(|| index_key.clone());
                    let saved = this.with_notebook(&nb_id, |nb| Ok(nb.record_execution(&cell, outcome, key)?)).await;
                    if let Err(err) = saved {
                        tracing::warn!(%err, cell = %cell, "could not record action result");
                    }
                    if this.auto_suggest {
                        this.spawn_suggestions(nb_id.clone());
                    }
                }
                let _ = tx.send(envelope);
            }
        });
        let stream = futures::stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|e| (e, rx)) });
        Ok((action_id, stream.boxed()))
    }

    /// Execute a cell and wait for its terminal event.
    pub async fn run_cell(self: &Arc<Self>, cell: &CellId) -> Result<Vec<EventEnvelope>> {
        let (_, stream) = self.execute_cell(cell).await?;
        Ok(stream.collect().await)
    }

    /// Generate suggestions and place them below the most recent cell.
    /// Returns the new suggestion cell, if any survived filtering and the
    /// notebook did not change in the meantime.
    pub async fn suggest(&self, id: &NotebookId) -> Result<Option<CellId>> {
        let notebook = self.notebook(id)?;
        let collection = self.collection(&notebook.collection_id).await?;
        let history = notebook.action_history();
        let set = suggestions::generate(&self.gateway, notebook.goal.as_deref(), &collection, &history).await;
        if set.is_empty() {
            return Ok(None);
        }
        let revision = notebook.revision;
        Ok(self.with_notebook(id, |nb| Ok(suggestions::insert_suggestions(nb, set, revision))).await?.0)
    }

    fn spawn_suggestions(self: &Arc<Self>, id: NotebookId) {
        let guard = self.track();
        let this = self.clone();
        tokio::spawn(async move {
            let _guard = guard;
            if let Err(err) = this.suggest(&id).await {
                tracing::warn!(%err, notebook = %id.0, "suggestion generation failed");
            }
        });
    }
}
