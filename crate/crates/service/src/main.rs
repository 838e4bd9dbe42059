use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use forage_core::corpus::{CollectionId, DocId};
use forage_core::engine::{ActionEvent, ActionOutput, ActionSpec};
use forage_core::notebook::{CellCommand, NewCell, NotebookId};
use forage_service::config::{ApiConfig, ConfigLayer};
use forage_service::{http, render, Workspace};

#[derive(Parser)]
#[command(name = "forage", version, about = "Search, question and tabulate a document collection")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Flags {
    /// TOML config file; its values override flags and environment.
    #[arg(long, global = true, env = "FORAGE_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    bind: Option<String>,
    #[arg(long, global = true)]
    llm_url: Option<String>,
    #[arg(long, global = true)]
    fast_model: Option<String>,
    #[arg(long, global = true)]
    strong_model: Option<String>,
    /// `local` or `remote`.
    #[arg(long, global = true)]
    embedding: Option<String>,
    #[arg(long, global = true)]
    fanout: Option<usize>,
    /// Use the offline mock model backend.
    #[arg(long, global = true)]
    mock: bool,
    /// Directory of mock fixture responses.
    #[arg(long, global = true)]
    mock_fixtures: Option<PathBuf>,
}

impl Flags {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            bind: self.bind.clone(),
            data_dir: self.data_dir.clone(),
            llm_url: self.llm_url.clone(),
            fast_model: self.fast_model.clone(),
            strong_model: self.strong_model.clone(),
            embedding: self.embedding.clone(),
            fanout: self.fanout,
            mock: self.mock.then_some(true),
            mock_fixtures: self.mock_fixtures.clone(),
            ..ConfigLayer::default()
        }
    }
}

#[derive(Args)]
struct Target {
    /// Restrict to these document ids (comma-separated).
    #[arg(long, value_delimiter = ',')]
    docs: Vec<String>,
    /// Record the action as a cell in this notebook.
    #[arg(long)]
    notebook: Option<String>,
    /// Print machine-readable JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a JSON manifest into a new collection.
    Ingest {
        manifest: PathBuf,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        goal: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Search every document; quoted parts match literally.
    Search {
        collection: String,
        query: String,
        #[command(flatten)]
        target: Target,
    },
    /// Ask a question of each document, or of the whole collection.
    Ask {
        collection: String,
        question: String,
        #[arg(long)]
        collection_mode: bool,
        #[command(flatten)]
        target: Target,
    },
    /// Summarize each document, optionally along some dimensions.
    Summarize {
        collection: String,
        #[arg(long)]
        dimensions: Option<String>,
        #[command(flatten)]
        target: Target,
    },
    /// Create a notebook for a collection.
    Notebook {
        collection: String,
        #[arg(long)]
        goal: Option<String>,
    },
    /// Generate follow-up suggestions for a notebook.
    Suggest {
        notebook: String,
        #[arg(long)]
        json: bool,
    },
    /// Print a notebook's aggregate table.
    Table {
        notebook: String,
        #[arg(long, value_delimiter = ',')]
        columns: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
        #[arg(long)]
        json: bool,
    },
    /// Write a notebook's aggregate table as CSV.
    Export {
        notebook: String,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_delimiter = ',')]
        columns: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
    },
    /// Run the HTTP API.
    Serve,
}

fn resolve_config(cli: &Cli) -> Result<ApiConfig> {
    let env: HashMap<String, String> = std::env::vars().collect();
    let mut layer = ConfigLayer::from_env(&env)?.overlay(cli.flags.layer());
    if let Some(path) = &cli.flags.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        layer = layer.overlay(ConfigLayer::from_toml(&text)?);
    }
    // Headless commands fall back to the mock backend; the server must be
    // told to use it.
    if !matches!(cli.command, Command::Serve) && layer.llm_url.is_none() && layer.mock.is_none() {
        eprintln!("note: no LLM endpoint configured, using the mock backend");
        layer.mock = Some(true);
    }
    Ok(ApiConfig::from_layer(layer)?)
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

async fn run_action(ws: &Arc<Workspace>, collection: &str, spec: ActionSpec, target: Target) -> Result<()> {
    let collection = CollectionId(collection.to_string());
    let spec = if target.docs.is_empty() {
        spec
    } else {
        spec.with_scope(target.docs.iter().map(|d| DocId(d.clone())).collect())
    };
    let output: ActionOutput = match &target.notebook {
        None => ws.run_direct(&collection, &spec).await?,
        Some(nb) => {
            let nb = NotebookId(nb.clone());
            if ws.notebook(&nb)?.collection_id != collection {
                bail!("notebook {} belongs to another collection", nb.0);
            }
            let create = CellCommand::Create { position: None, cell: NewCell::Action { spec } };
            let (cell, _) = ws.apply(&nb, create).await?;
            let events = ws.run_cell(&cell).await?;
            match events.into_iter().last().map(|e| e.event) {
                Some(ActionEvent::ActionCompleted(out)) => out,
                Some(ActionEvent::ActionFailed { diagnostic }) => bail!("{diagnostic}"),
                _ => bail!("action ended without a result"),
            }
        }
    };
    if target.json {
        print_json(&output)
    } else {
        let c = ws.collection(&collection).await?;
        print!("{}", render::action_output(&output, &c));
        Ok(())
    }
}

async fn run(cli: Cli) -> Result<()> {
    let config = resolve_config(&cli)?;
    let ws = Arc::new(Workspace::from_config(&config)?.with_auto_suggest(matches!(cli.command, Command::Serve)));
    match cli.command {
        Command::Ingest { manifest, name, goal, json } => {
            let text = std::fs::read_to_string(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text).context("manifest is not valid JSON")?;
            let collection = ws.ingest(&value, name, goal).await?;
            if json {
                print_json(&collection)?;
            } else {
                println!("{}", collection.id.0);
                for doc in &collection.documents {
                    eprintln!("  {}  {}  {} chunks", doc.id.0, doc.filename, doc.chunks.len());
                }
            }
        }
        Command::Search { collection, query, target } => {
            run_action(&ws, &collection, ActionSpec::search(query), target).await?
        }
        Command::Ask { collection, question, collection_mode, target } => {
            let spec = if collection_mode { ActionSpec::ask_collection(question) } else { ActionSpec::ask_each(question) };
            run_action(&ws, &collection, spec, target).await?
        }
        Command::Summarize { collection, dimensions, target } => {
            run_action(&ws, &collection, ActionSpec::summarize(dimensions), target).await?
        }
        Command::Notebook { collection, goal } => {
            let nb = ws.create_notebook(&CollectionId(collection), goal).await?;
            println!("{}", nb.id.0);
        }
        Command::Suggest { notebook, json } => {
            let id = NotebookId(notebook);
            let cell = ws.suggest(&id).await?;
            let nb = ws.notebook(&id)?;
            let content = match &cell {
                Some(cell) => Some(&nb.cell(cell)?.content),
                None => None,
            };
            if json {
                print_json(&serde_json::json!({ "cell_id": cell, "content": content }))?;
            } else if let (Some(cell), Some(content)) = (&cell, content) {
                println!("{}", cell.0);
                print!("{}", render::suggestion_cell(content));
            } else {
                eprintln!("no new suggestions");
            }
        }
        Command::Table { notebook, columns, order, json } => {
            let table = ws.table(&NotebookId(notebook), columns.as_deref(), order.as_deref()).await?;
            if json {
                print_json(&table)?;
            } else {
                print!("{}", render::aggregate(&table));
            }
        }
        Command::Export { notebook, csv, columns, order } => {
            let table = ws.table(&NotebookId(notebook), columns.as_deref(), order.as_deref()).await?;
            std::fs::write(&csv, table.export_csv()).with_context(|| format!("writing {}", csv.display()))?;
            eprintln!("wrote {} rows to {}", table.rows.len(), csv.display());
        }
        Command::Serve => {
            let listener = tokio::net::TcpListener::bind(config.bind)
                .await
                .map_err(|e| anyhow!("cannot bind {}: {e}", config.bind))?;
            tracing::info!(addr = %listener.local_addr()?, "listening");
            eprintln!("listening on {}", listener.local_addr()?);
            http::serve(ws, listener, async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("FORAGE_LOG"))
        .with_writer(std::io::stderr)
        .init();
    if let Err(err) = run(Cli::parse()).await {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
