//! AI-suggested follow-up searches and questions.

use serde::{Deserialize, Serialize};

use crate::corpus::Collection;
use crate::engine::ActionSpec;
use crate::llm::{
    bindings, format_list, format_samples, normalize_attribute, parse_suggestions, render_prompt, ChatRequest,
    Gateway, PromptKind,
};
use crate::notebook::{ActionHistory, CellContent, CellId, Notebook, NotebookError, SuggestionSet, SuggestionState};

/// Maximum suggestions shown in one suggestion cell.
pub const MAX_DISPLAYED: usize = 3;
/// Sample documents included in the prompt.
pub const SAMPLE_DOCUMENTS: usize = 3;
/// Characters of each sample document included in the prompt.
pub const SAMPLE_CHARS: usize = 1000;

/// The suggestions prompt for a goal, collection and history.
pub fn suggestion_prompt(goal: Option<&str>, collection: &Collection, history: &ActionHistory) -> String {
    let samples: Vec<String> = collection
        .documents
        .iter()
        .take(SAMPLE_DOCUMENTS)
        .map(|d| d.full_text.chars().take(SAMPLE_CHARS).collect())
        .collect();
    render_prompt(
        PromptKind::Suggestions,
        &bindings([
            ("Goal", goal.unwrap_or_default().to_string()),
            ("Samples", format_samples(&samples)),
            ("Searches", format_list(&history.searches)),
            ("Questions", format_list(&history.questions)),
        ]),
    )
    .expect("all suggestion bindings supplied")
}

/// Drop blanks, repeats and anything already in the history, then keep at
/// most [`MAX_DISPLAYED`] items, searches first.
pub fn filter_suggestions(searches: Vec<String>, questions: Vec<String>, history: &ActionHistory) -> SuggestionSet {
    let mut seen: Vec<String> =
        history.searches.iter().chain(&history.questions).map(|h| normalize_attribute(h)).collect();
    let mut keep = |items: Vec<String>| -> Vec<String> {
        items
            .into_iter()
            .map(|s| s.trim().to_string())
            .filter(|s| {
                let norm = normalize_attribute(s);
                if norm.is_empty() || seen.contains(&norm) {
                    return false;
                }
                seen.push(norm);
                true
            })
            .collect()
    };
    let mut searches = keep(searches);
    let mut questions = keep(questions);
    searches.truncate(MAX_DISPLAYED);
    questions.truncate(MAX_DISPLAYED - searches.len());
    SuggestionSet { searches, questions, created_after_cell: None }
}

/// Ask the model for suggestions. Any failure yields an empty set.
pub async fn generate(
    gateway: &Gateway,
    goal: Option<&str>,
    collection: &Collection,
    history: &ActionHistory,
) -> SuggestionSet {
    let request = ChatRequest::new(PromptKind::Suggestions, suggestion_prompt(goal, collection, history));
    match gateway.complete_parsed(&request, parse_suggestions).await {
        Ok((searches, questions)) => filter_suggestions(searches, questions, history),
        Err(err) => {
            tracing::warn!(%err, "suggestion generation failed");
            SuggestionSet::default()
        }
    }
}

/// Place `set` immediately below the most recently created cell, unless the
/// notebook changed since `trigger_revision` or the set is empty.
pub fn insert_suggestions(notebook: &mut Notebook, mut set: SuggestionSet, trigger_revision: u64) -> Option<CellId> {
    if set.is_empty() || notebook.revision != trigger_revision {
        return None;
    }
    let anchor = notebook.most_recent_cell().map(|c| c.id.clone());
    let position = match &anchor {
        Some(id) => notebook.position(id).expect("anchor exists") + 1,
        None => 0,
    };
    set.created_after_cell = anchor;
    let id = notebook.insert(position, CellContent::Suggestion { set, state: SuggestionState::Pending });
    notebook.revision += 1;
    Some(id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionItemKind {
    Search,
    Question,
}

/// Which entry of a suggestion cell to accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionItem {
    pub kind: SuggestionItemKind,
    pub index: usize,
}

fn pending_set<'a>(notebook: &'a mut Notebook, cell_id: &CellId) -> Result<(&'a SuggestionSet, &'a mut SuggestionState), NotebookError> {
    let cell = notebook.cell_mut(cell_id)?;
    match &mut cell.content {
        CellContent::Suggestion { set, state } => {
            if *state != SuggestionState::Pending {
                return Err(NotebookError::AlreadyResolved(cell_id.clone()));
            }
            Ok((set, state))
        }
        _ => Err(NotebookError::NotASuggestion(cell_id.clone())),
    }
}

/// Turn one suggestion into an unexecuted Action cell directly below it:
/// searches become Search cells, questions become per-document Ask cells.
pub fn accept(notebook: &mut Notebook, cell_id: &CellId, item: SuggestionItem) -> Result<CellId, NotebookError> {
    let (set, state) = pending_set(notebook, cell_id)?;
    let list = match item.kind {
        SuggestionItemKind::Search => &set.searches,
        SuggestionItemKind::Question => &set.questions,
    };
    let text = list.get(item.index).cloned().ok_or(NotebookError::UnknownItem(item.index))?;
    *state = SuggestionState::Accepted;
    let spec = match item.kind {
        SuggestionItemKind::Search => ActionSpec::search(text),
        SuggestionItemKind::Question => ActionSpec::ask_each(text),
    };
    let position = notebook.position(cell_id)? + 1;
    let id = notebook.insert(position, CellContent::action(spec));
    notebook.revision += 1;
    Ok(id)
}

pub fn dismiss(notebook: &mut Notebook, cell_id: &CellId) -> Result<(), NotebookError> {
    let (_, state) = pending_set(notebook, cell_id)?;
    *state = SuggestionState::Dismissed;
    notebook.cell_mut(cell_id)?.hidden = true;
    notebook.revision += 1;
    Ok(())
}
