#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use forage_core::engine::EngineConfig;
use forage_core::index::HashingEmbedder;
use forage_core::llm::{Gateway, MockBackend, ModelNames};
use forage_core::store::Store;
use forage_service::{http, Workspace};
use serde_json::Value;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

pub fn manifest(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

/// An in-process API server on an ephemeral port.
pub struct Server {
    pub base: String,
    pub ws: Arc<Workspace>,
    pub mock: Arc<MockBackend>,
    pub client: reqwest::Client,
    pub dir: tempfile::TempDir,
    shutdown: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<std::io::Result<()>>>,
}

impl Server {
    pub async fn start(mock: MockBackend) -> Self {
        let dir = tempfile::tempdir().unwrap();
        Self::start_in(dir, mock).await
    }

    pub async fn start_in(dir: tempfile::TempDir, mock: MockBackend) -> Self {
        Self::launch(dir, mock, false).await
    }

    pub async fn launch(dir: tempfile::TempDir, mock: MockBackend, auto_suggest: bool) -> Self {
        let mock = Arc::new(mock);
        let gateway = Arc::new(Gateway::new(mock.clone(), ModelNames::default()));
        let ws = Arc::new(Workspace::new(
            Store::open(dir.path()).unwrap(),
            gateway,
            Arc::new(HashingEmbedder::new()),
            EngineConfig::default(),
        )
        .with_auto_suggest(auto_suggest));
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel();
        let handle = tokio::spawn(http::serve(ws.clone(), listener, async {
            let _ = rx.await;
        }));
        Self { base, ws, mock, client: reqwest::Client::new(), dir, shutdown: Some(tx), handle: Some(handle) }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let resp = self.client.post(self.url(path)).json(&body).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let resp = self.client.get(self.url(path)).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    /// Execute a cell and return its NDJSON events.
    pub async fn execute(&self, cell_id: &str) -> Vec<Value> {
        let resp = self.client.post(self.url(&format!("/cells/{cell_id}/execute"))).send().await.unwrap();
        assert_eq!(resp.status().as_u16(), 200);
        assert_eq!(resp.headers()["content-type"], "application/x-ndjson");
        let text = resp.text().await.unwrap();
        text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
    }

    pub async fn add_action(&self, notebook: &str, spec: Value) -> String {
        let cmd = serde_json::json!({ "command": "create", "position": null, "cell": { "kind": "action", "spec": spec } });
        let (status, body) = self.post(&format!("/notebooks/{notebook}/cells"), cmd).await;
        assert_eq!(status, 200, "{body}");
        body["cell_id"].as_str().unwrap().to_string()
    }

    /// Stop accepting connections and wait for in-flight work to drain.
    pub async fn stop(mut self) -> tempfile::TempDir {
        let _ = self.shutdown.take().unwrap().send(());
        tokio::time::timeout(Duration::from_secs(10), self.handle.take().unwrap()).await.unwrap().unwrap().unwrap();
        self.dir
    }
}

pub fn search_spec(query: &str) -> Value {
    serde_json::json!({ "kind": "Search", "raw_query": query })
}
