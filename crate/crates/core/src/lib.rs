//! Engine for collection-centric document foraging.
//!
//! Documents are ingested into sentence chunks with character offsets
//! ([`corpus`]), embedded for per-document retrieval ([`index`]), and
//! queried through four actions executed over a document scope
//! ([`engine`]): Search, Ask over each document, Ask over the collection,
//! and Summarize. Model calls go through a role-addressed [`llm`] gateway.
//! Sessions live in [`notebook`]s whose executed results roll up into an
//! aggregate [`table`]; [`suggestions`] proposes follow-up queries.

pub mod corpus;
pub mod index;
pub mod llm;
pub mod text;
pub mod engine;
pub mod notebook;
pub mod table;
pub mod suggestions;
pub mod store;
