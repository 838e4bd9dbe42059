//! Notebooks: ordered Text, Action and Suggestion cells recording a session.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CollectionId, DocId};
use crate::engine::{ActionKind, ActionOutput, ActionSpec, ResultCell};
use crate::index::IndexKey;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NotebookError {
    #[error("unknown cell {0}")]
    UnknownCell(CellId),
    #[error("unknown row {0}")]
    UnknownRow(DocId),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("suggestion cells are created by the system only")]
    CannotCreateSuggestion,
    #[error("cell {0} is not an action cell")]
    NotAnAction(CellId),
    #[error("cell {0} has no completed results")]
    NoResults(CellId),
    #[error("cell {0} is not a suggestion cell")]
    NotASuggestion(CellId),
    #[error("suggestion cell {0} was already accepted or dismissed")]
    AlreadyResolved(CellId),
    #[error("suggestion item {0} does not exist")]
    UnknownItem(usize),
    #[error("position {0} is past the end of the notebook")]
    BadPosition(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub String);

impl CellId {
    pub fn new() -> Self {
        Self(format!("cell-{}", uuid::Uuid::new_v4().simple()))
    }
}

impl Default for CellId {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NotebookId(pub String);

impl NotebookId {
    pub fn new() -> Self {
        Self(format!("nb-{}", uuid::Uuid::new_v4().simple()))
    }
}

impl Default for NotebookId {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Display for NotebookId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum ExecutionStatus {
    Unexecuted,
    Running,
    Completed,
    Failed { message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionState {
    Pending,
    Accepted,
    Dismissed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SuggestionSet {
    pub searches: Vec<String>,
    pub questions: Vec<String>,
    /// Cell the suggestions were placed below; `None` means the start.
    pub created_after_cell: Option<CellId>,
}

impl SuggestionSet {
    pub fn is_empty(&self) -> bool {
        self.searches.is_empty() && self.questions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.searches.len() + self.questions.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellContent {
    /// Markdown-style markup (emphasis, lists, headings) stored verbatim.
    Text { markup: String },
    Action {
        spec: ActionSpec,
        status: ExecutionStatus,
        output: Option<ActionOutput>,
        index_key: Option<IndexKey>,
    },
    Suggestion { set: SuggestionSet, state: SuggestionState },
}

impl CellContent {
    pub fn action(spec: ActionSpec) -> Self {
        CellContent::Action { spec, status: ExecutionStatus::Unexecuted, output: None, index_key: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: CellId,
    pub hidden: bool,
    /// Creation order across the notebook's lifetime.
    pub created_seq: u64,
    #[serde(flatten)]
    pub content: CellContent,
}

impl Cell {
    pub fn is_executed(&self) -> bool {
        matches!(&self.content, CellContent::Action { status: ExecutionStatus::Completed, .. })
    }
}

/// Content a user may create; suggestion cells are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NewCell {
    Text { markup: String },
    Action { spec: ActionSpec },
    Suggestion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum CellCommand {
    Create { position: Option<usize>, cell: NewCell },
    Delete { cell_id: CellId },
    Hide { cell_id: CellId },
    Duplicate { cell_id: CellId },
    Clear { cell_id: CellId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "text", rename_all = "snake_case")]
pub enum ResultEdit {
    Replace(String),
    Remove,
}

/// Raw queries of executed actions, in notebook order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ActionHistory {
    pub searches: Vec<String>,
    pub questions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notebook {
    pub id: NotebookId,
    pub collection_id: CollectionId,
    pub goal: Option<String>,
    pub cells: Vec<Cell>,
    pub next_seq: u64,
    /// Bumped by every mutation; used to discard stale background work.
    pub revision: u64,
}

impl Notebook {
    pub fn new(collection_id: CollectionId, goal: Option<String>) -> Self {
        Self { id: NotebookId::new(), collection_id, goal, cells: Vec::new(), next_seq: 0, revision: 0 }
    }

    pub fn cell(&self, id: &CellId) -> Result<&Cell, NotebookError> {
        self.cells.iter().find(|c| &c.id == id).ok_or_else(|| NotebookError::UnknownCell(id.clone()))
    }

    pub(crate) fn cell_mut(&mut self, id: &CellId) -> Result<&mut Cell, NotebookError> {
        self.cells.iter_mut().find(|c| &c.id == id).ok_or_else(|| NotebookError::UnknownCell(id.clone()))
    }

    pub fn position(&self, id: &CellId) -> Result<usize, NotebookError> {
        self.cells.iter().position(|c| &c.id == id).ok_or_else(|| NotebookError::UnknownCell(id.clone()))
    }

    pub(crate) fn insert(&mut self, position: usize, content: CellContent) -> CellId {
        let id = CellId::new();
        let cell = Cell { id: id.clone(), hidden: false, created_seq: self.next_seq, content };
        self.next_seq += 1;
        self.cells.insert(position, cell);
        id
    }

    /// The cell created last, if any cells remain.
    pub fn most_recent_cell(&self) -> Option<&Cell> {
        self.cells.iter().max_by_key(|c| c.created_seq)
    }

    /// Apply a cell command; returns the id of the created or affected cell.
    pub fn apply(&mut self, command: CellCommand) -> Result<CellId, NotebookError> {
        let id = match command {
            CellCommand::Create { position, cell } => {
                let content = match cell {
                    NewCell::Text { markup } => CellContent::Text { markup },
                    NewCell::Action { spec } => CellContent::action(spec),
                    NewCell::Suggestion => return Err(NotebookError::CannotCreateSuggestion),
                };
                let position = position.unwrap_or(self.cells.len());
                if position > self.cells.len() {
                    return Err(NotebookError::BadPosition(position));
                }
                self.insert(position, content)
            }
            CellCommand::Delete { cell_id } => {
                let pos = self.position(&cell_id)?;
                self.cells.remove(pos);
                cell_id
            }
            CellCommand::Hide { cell_id } => {
                let cell = self.cell_mut(&cell_id)?;
                cell.hidden = !cell.hidden;
                cell_id
            }
            CellCommand::Duplicate { cell_id } => {
                let pos = self.position(&cell_id)?;
                let content = match &self.cells[pos].content {
                    CellContent::Text { markup } => CellContent::Text { markup: markup.clone() },
                    CellContent::Action { spec, .. } => CellContent::action(spec.clone()),
                    CellContent::Suggestion { .. } => return Err(NotebookError::CannotCreateSuggestion),
                };
                self.insert(pos + 1, content)
            }
            CellCommand::Clear { cell_id } => {
                let cell = self.cell_mut(&cell_id)?;
                match &mut cell.content {
                    CellContent::Text { markup } => markup.clear(),
                    CellContent::Action { status, output, index_key, .. } => {
                        *status = ExecutionStatus::Unexecuted;
                        *output = None;
                        *index_key = None;
                    }
                    CellContent::Suggestion { set, .. } => {
                        set.searches.clear();
                        set.questions.clear();
                    }
                }
                cell_id
            }
        };
        self.revision += 1;
        Ok(id)
    }

    /// Mark an action cell running and return its spec.
    pub fn begin_execution(&mut self, cell_id: &CellId) -> Result<ActionSpec, NotebookError> {
        let cell = self.cell_mut(cell_id)?;
        match &mut cell.content {
            CellContent::Action { spec, status, .. } => {
                *status = ExecutionStatus::Running;
                let spec = spec.clone();
                self.revision += 1;
                Ok(spec)
            }
            _ => Err(NotebookError::NotAnAction(cell_id.clone())),
        }
    }

    /// Store the outcome of executing an action cell.
    pub fn record_execution(
        &mut self,
        cell_id: &CellId,
        result: Result<ActionOutput, String>,
        key: Option<IndexKey>,
    ) -> Result<(), NotebookError> {
        let cell = self.cell_mut(cell_id)?;
        match &mut cell.content {
            CellContent::Action { status, output, index_key, .. } => {
                match result {
                    Ok(out) => {
                        *status = ExecutionStatus::Completed;
                        *output = Some(out);
                        *index_key = key;
                    }
                    Err(message) => {
                        *status = ExecutionStatus::Failed { message };
                        *output = None;
                        *index_key = None;
                    }
                }
                self.revision += 1;
                Ok(())
            }
            _ => Err(NotebookError::NotAnAction(cell_id.clone())),
        }
    }

    /// Replace or remove one result value. Edited cells lose their spans.
    pub fn edit_result(
        &mut self,
        cell_id: &CellId,
        doc_id: &DocId,
        column: &str,
        edit: ResultEdit,
    ) -> Result<(), NotebookError> {
        let cell = self.cell_mut(cell_id)?;
        let CellContent::Action { status, output, .. } = &mut cell.content else {
            return Err(NotebookError::NotAnAction(cell_id.clone()));
        };
        let (ExecutionStatus::Completed, Some(output)) = (&*status, output.as_mut()) else {
            return Err(NotebookError::NoResults(cell_id.clone()));
        };
        let table = output.table_mut();
        let col = table.column_index(column).ok_or_else(|| NotebookError::UnknownColumn(column.to_string()))?;
        let row = table
            .rows
            .iter_mut()
            .find(|r| &r.doc_id == doc_id)
            .ok_or_else(|| NotebookError::UnknownRow(doc_id.clone()))?;
        let mut edited = match edit {
            ResultEdit::Replace(text) => ResultCell::generated(text, Vec::new()),
            ResultEdit::Remove => ResultCell::not_found(),
        };
        edited.edited = true;
        row.cells[col] = edited;
        self.revision += 1;
        Ok(())
    }

    /// Queries of executed Search and Ask cells, hidden ones included.
    pub fn action_history(&self) -> ActionHistory {
        let mut history = ActionHistory::default();
        for cell in self.cells.iter().filter(|c| c.is_executed()) {
            if let CellContent::Action { spec, .. } = &cell.content {
                match spec.kind {
                    ActionKind::Search => history.searches.push(spec.raw_query.clone()),
                    ActionKind::AskEach | ActionKind::AskCollection => history.questions.push(spec.raw_query.clone()),
                    ActionKind::Summarize => {}
                }
            }
        }
        history
    }

    /// Cells the UI shows, in order.
    pub fn render_list(&self) -> Vec<&Cell> {
        self.cells.iter().filter(|c| !c.hidden).collect()
    }

    /// Action cells whose cached results were computed against another index.
    pub fn stale_cells(&self, current: &IndexKey) -> Vec<CellId> {
        self.cells
            .iter()
            .filter(|c| match &c.content {
                CellContent::Action { index_key: Some(k), .. } => k != current,
                _ => false,
            })
            .map(|c| c.id.clone())
            .collect()
    }
}
