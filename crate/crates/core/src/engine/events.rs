//! Streamed action events and their newline-delimited JSON envelope.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;

use super::{ActionOutput, ResultCell};
use crate::corpus::DocId;

/// Collection-QA phases, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    IdentifyAttributes,
    SearchMissingAttributes,
    UpdateTableSchema,
    PromptLlm,
    DisplayResults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "payload")]
pub enum ActionEvent {
    ActionStarted { columns: Vec<String> },
    RowCompleted { doc_id: DocId, cells: Vec<ResultCell> },
    PhaseChanged { phase: Phase, columns: Vec<String> },
    ActionCompleted(ActionOutput),
    ActionFailed { diagnostic: String },
}

impl ActionEvent {
    pub fn name(&self) -> &'static str {
        match self {
            ActionEvent::ActionStarted { .. } => "ActionStarted",
            ActionEvent::RowCompleted { .. } => "RowCompleted",
            ActionEvent::PhaseChanged { .. } => "PhaseChanged",
            ActionEvent::ActionCompleted(_) => "ActionCompleted",
            ActionEvent::ActionFailed { .. } => "ActionFailed",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, ActionEvent::ActionCompleted(_) | ActionEvent::ActionFailed { .. })
    }
}

/// One record of the event stream: `{event, action_id, seq, payload}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEnvelope {
    pub action_id: String,
    pub seq: u64,
    #[serde(flatten)]
    pub event: ActionEvent,
}

impl EventEnvelope {
    pub fn to_ndjson(&self) -> String {
        let mut line = serde_json::to_string(self).expect("events serialize");
        line.push('\n');
        line
    }
}

/// Numbers events and forwards them to a channel. Sending after the
/// receiver is gone is silently ignored.
pub(crate) struct EventSink {
    action_id: String,
    seq: AtomicU64,
    tx: mpsc::UnboundedSender<EventEnvelope>,
}

impl EventSink {
    pub(crate) fn new(action_id: String, tx: mpsc::UnboundedSender<EventEnvelope>) -> Self {
        Self { action_id, seq: AtomicU64::new(0), tx }
    }

    pub(crate) fn emit(&self, event: ActionEvent) {
        let seq = self.seq.fetch_add(1, Ordering::SeqCst);
        let _ = self.tx.send(EventEnvelope { action_id: self.action_id.clone(), seq, event });
    }
}
