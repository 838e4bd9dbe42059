//! HTTP API and shared operations for the `forage` binary.
//!
//! [`workspace::Workspace`] owns the data directory, model gateway and
//! embedder; both [`http`] handlers and the CLI call into it, so the two
//! surfaces produce identical engine results.

pub mod config;
pub mod http;
pub mod render;
pub mod workspace;

pub use config::{ApiConfig, ConfigLayer};
pub use workspace::{Workspace, WorkspaceError};
