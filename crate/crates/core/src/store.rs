//! File-based persistence under a data directory.
//!
//! ```text
//! {data}/collections/{collection_id}.json        collection, schema 1
//! {data}/collections/{collection_id}.index.json  vector index, schema 1
//! {data}/notebooks/{notebook_id}.json            notebook, schema 2
//! ```
//!
//! Notebook schema 1 predates hidden cells and creation sequencing; loading
//! it fills `hidden = false`, `created_seq` = list position, `next_seq` =
//! cell count and `revision = 0`. Any other version is rejected.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::corpus::{Collection, CollectionId};
use crate::index::VectorIndex;
use crate::notebook::{Notebook, NotebookId};

pub const COLLECTION_SCHEMA_VERSION: u64 = 1;
pub const INDEX_SCHEMA_VERSION: u64 = 1;
pub const NOTEBOOK_SCHEMA_VERSION: u64 = 2;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: String },
    #[error("{kind} file has schema version {found}, expected {expected}")]
    SchemaVersionMismatch { kind: &'static str, found: u64, expected: u64 },
    #[error("io error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid json in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

impl Store {
    /// Open (creating if needed) a data directory.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for sub in ["collections", "notebooks"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn collection_path(&self, id: &CollectionId) -> PathBuf {
        self.root.join("collections").join(format!("{}.json", id.0))
    }

    fn index_path(&self, id: &CollectionId) -> PathBuf {
        self.root.join("collections").join(format!("{}.index.json", id.0))
    }

    fn notebook_path(&self, id: &NotebookId) -> PathBuf {
        self.root.join("notebooks").join(format!("{}.json", id.0))
    }

    fn write_json(path: &Path, value: &Value) -> Result<(), StoreError> {
        let tmp = path.with_extension(format!("tmp-{}", uuid::Uuid::new_v4().simple()));
        let bytes = serde_json::to_vec(value).map_err(|source| StoreError::Json { path: path.into(), source })?;
        let mut file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        file.write_all(&bytes).map_err(io_err(&tmp))?;
        file.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    }

    fn read_json(path: &Path, kind: &'static str, id: &str) -> Result<Value, StoreError> {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound { kind, id: id.to_string() })
            }
            Err(e) => return Err(io_err(path)(e)),
        };
        serde_json::from_slice(&bytes).map_err(|source| StoreError::Json { path: path.into(), source })
    }

    fn save_versioned<T: Serialize>(path: &Path, field: &str, version: u64, value: &T) -> Result<(), StoreError> {
        let body = serde_json::to_value(value).map_err(|source| StoreError::Json { path: path.into(), source })?;
        Self::write_json(path, &json!({ "schema_version": version, field: body }))
    }

    fn load_versioned<T: DeserializeOwned>(
        path: &Path,
        kind: &'static str,
        id: &str,
        field: &str,
        expected: u64,
    ) -> Result<T, StoreError> {
        let mut value = Self::read_json(path, kind, id)?;
        let found = schema_version(&value);
        if found != expected {
            return Err(StoreError::SchemaVersionMismatch { kind, found, expected });
        }
        let body = value.get_mut(field).map(Value::take).unwrap_or(Value::Null);
        serde_json::from_value(body).map_err(|source| StoreError::Json { path: path.into(), source })
    }

    pub fn save_collection(&self, collection: &Collection) -> Result<(), StoreError> {
        Self::save_versioned(&self.collection_path(&collection.id), "collection", COLLECTION_SCHEMA_VERSION, collection)
    }

    pub fn load_collection(&self, id: &CollectionId) -> Result<Collection, StoreError> {
        Self::load_versioned(&self.collection_path(id), "collection", &id.0, "collection", COLLECTION_SCHEMA_VERSION)
    }

    pub fn save_index(&self, index: &VectorIndex) -> Result<(), StoreError> {
        Self::save_versioned(&self.index_path(&index.collection_id), "index", INDEX_SCHEMA_VERSION, index)
    }

    pub fn load_index(&self, id: &CollectionId) -> Result<VectorIndex, StoreError> {
        Self::load_versioned(&self.index_path(id), "index", &id.0, "index", INDEX_SCHEMA_VERSION)
    }

    pub fn save_notebook(&self, notebook: &Notebook) -> Result<(), StoreError> {
        Self::save_versioned(&self.notebook_path(&notebook.id), "notebook", NOTEBOOK_SCHEMA_VERSION, notebook)
    }

    pub fn load_notebook(&self, id: &NotebookId) -> Result<Notebook, StoreError> {
        let path = self.notebook_path(id);
        let mut value = Self::read_json(&path, "notebook", &id.0)?;
        match schema_version(&value) {
            NOTEBOOK_SCHEMA_VERSION => {}
            1 => migrate_notebook_v1(&mut value),
            found => {
                return Err(StoreError::SchemaVersionMismatch {
                    kind: "notebook",
                    found,
                    expected: NOTEBOOK_SCHEMA_VERSION,
                })
            }
        }
        let body = value.get_mut("notebook").map(Value::take).unwrap_or(Value::Null);
        serde_json::from_value(body).map_err(|source| StoreError::Json { path, source })
    }

    fn list_stems(&self, sub: &str) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join(sub);
        let mut stems = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let name = entry.map_err(io_err(&dir))?.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix(".json") {
                if !stem.ends_with(".index") {
                    stems.push(stem.to_string());
                }
            }
        }
        stems.sort();
        Ok(stems)
    }

    pub fn list_collections(&self) -> Result<Vec<CollectionId>, StoreError> {
        Ok(self.list_stems("collections")?.into_iter().map(CollectionId).collect())
    }

    pub fn list_notebooks(&self) -> Result<Vec<NotebookId>, StoreError> {
        Ok(self.list_stems("notebooks")?.into_iter().map(NotebookId).collect())
    }
}

fn schema_version(value: &Value) -> u64 {
    value.get("schema_version").and_then(Value::as_u64).unwrap_or(0)
}

fn migrate_notebook_v1(value: &mut Value) {
    let Some(nb) = value.get_mut("notebook").and_then(Value::as_object_mut) else {
        return;
    };
    let mut count = 0u64;
    if let Some(cells) = nb.get_mut("cells").and_then(Value::as_array_mut) {
        for (i, cell) in cells.iter_mut().enumerate() {
            if let Some(cell) = cell.as_object_mut() {
                cell.entry("hidden").or_insert(json!(false));
                cell.entry("created_seq").or_insert(json!(i as u64));
            }
        }
        count = cells.len() as u64;
    }
    nb.entry("next_seq").or_insert(json!(count));
    nb.entry("revision").or_insert(json!(0));
    value["schema_version"] = json!(NOTEBOOK_SCHEMA_VERSION);
}
