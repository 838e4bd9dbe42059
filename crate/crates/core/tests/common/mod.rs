#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use futures::stream::BoxStream;
use futures::StreamExt;

use forage_core::corpus::{parse_manifest, Collection, Document};
use forage_core::engine::{ActionContext, EngineConfig, EventEnvelope};
use forage_core::index::{HashingEmbedder, VectorIndex};
use forage_core::llm::{
    format_context, format_list, format_samples, format_table, Bindings, Gateway, MockBackend, ModelNames, PromptKind,
    render_prompt,
};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// `contracts` (10 documents) or `resumes` (15 documents).
pub fn corpus(name: &str) -> Collection {
    let manifest = parse_manifest(&read_fixture(&format!("fixtures/{name}.json"))).expect("fixture manifest");
    Collection::create(manifest.name.unwrap_or_default(), manifest.documents, manifest.goal).expect("fixture corpus")
}

pub struct Harness {
    pub ctx: ActionContext,
    pub mock: Arc<MockBackend>,
    pub gateway: Arc<Gateway>,
}

pub async fn harness(collection: Collection, mock: MockBackend, config: EngineConfig) -> Harness {
    let embedder = Arc::new(HashingEmbedder::new());
    let index = VectorIndex::build(&collection, embedder.as_ref(), 8).await.expect("index");
    let mock = Arc::new(mock);
    let gateway = Arc::new(Gateway::new(mock.clone(), ModelNames::default()));
    let ctx = ActionContext::new(Arc::new(collection), Arc::new(index), embedder, gateway.clone()).with_config(config);
    Harness { ctx, mock, gateway }
}

/// Fixture bindings for each prompt kind, paired with the checked-in
/// golden file the rendered prompt must equal.
pub fn golden_cases() -> Vec<(PromptKind, Bindings, String)> {
    let b = |pairs: &[(&str, String)]| -> Bindings { pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect() };
    vec![
        (
            PromptKind::Search,
            b(&[
                (
                    "Context",
                    format_context(["The monthly fee is $1,250.", "Payment is due within 30 days of invoice."]),
                ),
                ("Query", "payment terms".into()),
            ]),
            read_fixture("golden/search.txt"),
        ),
        (
            PromptKind::AskDoc,
            b(&[
                ("Examples", "DOCUMENT: Rent is $900.\nQUESTION: What is the rent?\nANSWER: The rent is $900.".into()),
                ("Context", "The agreement renews automatically each year.".into()),
                ("Question", "Does the agreement renew?".into()),
            ]),
            read_fixture("golden/ask_doc.txt"),
        ),
        (
            PromptKind::DetectAttributes,
            b(&[
                ("Goal", "Compare vendor contracts before renewal".into()),
                ("Columns", format_list(&["monthly fee", "termination notice"])),
                ("Question", "Which vendor has the best payment terms?".into()),
            ]),
            read_fixture("golden/detect_attributes.txt"),
        ),
        (
            PromptKind::Synthesize,
            b(&[
                (
                    "Table",
                    format_table(
                        &["Document", "monthly fee"],
                        &[
                            vec!["contract_01.pdf".into(), "$1,250".into()],
                            vec!["contract_02.pdf".into(), "$980".into()],
                        ],
                    ),
                ),
                ("Question", "Which contract is cheapest?".into()),
            ]),
            read_fixture("golden/synthesize.txt"),
        ),
        (
            PromptKind::Suggestions,
            b(&[
                ("Goal", "Shortlist candidates for a senior data role".into()),
                (
                    "Samples",
                    format_samples(&[
                        "Jane Doe. Data engineer, 8 years.",
                        "John Roe. Analyst, 3 years.",
                        "Ana Poe. Statistician, 5 years.",
                    ]),
                ),
                ("Searches", format_list(&["python"])),
                ("Questions", format_list(&["How many years of experience?"])),
            ]),
            read_fixture("golden/suggestions.txt"),
        ),
    ]
}

/// The exact search prompt the engine sends for `query` on `doc`.
pub async fn search_prompt(ctx: &ActionContext, doc: &Document, query: &str) -> String {
    let vector = ctx.embedder.embed(query).await.expect("embed query");
    let mut picked: Vec<usize> = ctx
        .index
        .topk_by_vector(&doc.id, &vector, ctx.config.top_k)
        .expect("topk")
        .into_iter()
        .map(|h| h.chunk_index)
        .collect();
    picked.sort_unstable();
    let context = format_context(picked.iter().map(|&i| doc.chunks[i].text.as_str()));
    let b: Bindings = [("Context", context), ("Query", query.to_string())]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    render_prompt(PromptKind::Search, &b).expect("search prompt")
}

pub async fn collect_events(mut stream: BoxStream<'static, EventEnvelope>) -> Vec<EventEnvelope> {
    let mut out = Vec::new();
    while let Some(e) = stream.next().await {
        out.push(e);
    }
    out
}

/// Minimal RFC 4180 reader, kept separate from the exporter's csv crate.
pub fn parse_csv(text: &str) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut row = Vec::new();
    let mut field = String::new();
    let mut quoted = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if quoted {
            match c {
                '"' if chars.peek() == Some(&'"') => {
                    chars.next();
                    field.push('"');
                }
                '"' => quoted = false,
                _ => field.push(c),
            }
            continue;
        }
        match c {
            '"' => quoted = true,
            ',' => row.push(std::mem::take(&mut field)),
            '\r' if chars.peek() == Some(&'\n') => {}
            '\n' => {
                row.push(std::mem::take(&mut field));
                rows.push(std::mem::take(&mut row));
            }
            _ => field.push(c),
        }
    }
    if !field.is_empty() || !row.is_empty() {
        row.push(field);
        rows.push(row);
    }
    rows
}

pub mod gen {
    use forage_core::corpus::{CollectionId, DocId};
    use forage_core::engine::{
        ActionKind, ActionOutput, ActionSpec, AttributeUse, CellOrigin, CollectionAnswer, ResultCell, ResultRow,
        ResultTable, Scope, Span,
    };
    use forage_core::index::IndexKey;
    use forage_core::notebook::{
        Cell, CellContent, CellId, ExecutionStatus, Notebook, NotebookId, SuggestionSet, SuggestionState,
    };
    use proptest::prelude::*;

    pub fn text() -> impl Strategy<Value = String> {
        prop_oneof![
            3 => "[a-zA-Z0-9 ,.\"'\n\r\t-]{0,24}",
            1 => "\\PC{0,12}",
            1 => Just("— not found —".to_string()),
        ]
    }

    fn cell() -> impl Strategy<Value = ResultCell> {
        (
            text(),
            prop::collection::vec((0usize..5000, 0usize..200), 0..3),
            prop_oneof![Just(CellOrigin::Extracted), Just(CellOrigin::Generated), Just(CellOrigin::Error)],
            any::<bool>(),
            any::<bool>(),
        )
            .prop_map(|(text, spans, origin, edited, unaligned)| ResultCell {
                text,
                spans: spans.into_iter().map(|(s, l)| Span { char_start: s, char_end: s + l }).collect(),
                origin,
                edited,
                unaligned,
            })
    }

    fn table() -> impl Strategy<Value = ResultTable> {
        (1usize..4).prop_flat_map(|width| {
            (
                prop::collection::vec(text(), width),
                prop::collection::vec(("[a-z0-9-]{1,10}", prop::collection::vec(cell(), width)), 0..4),
            )
                .prop_map(|(columns, rows)| ResultTable {
                    columns,
                    rows: rows.into_iter().map(|(d, cells)| ResultRow { doc_id: DocId(d), cells }).collect(),
                })
        })
    }

    fn output() -> impl Strategy<Value = ActionOutput> {
        prop_oneof![
            table().prop_map(ActionOutput::Table),
            (text(), table(), prop::collection::vec((text(), any::<bool>()), 0..3)).prop_map(|(answer, evidence, used)| {
                ActionOutput::Answer(CollectionAnswer {
                    answer,
                    evidence,
                    attributes_used: used.into_iter().map(|(name, reused)| AttributeUse { name, reused }).collect(),
                })
            }),
        ]
    }

    fn spec() -> impl Strategy<Value = ActionSpec> {
        (
            prop_oneof![
                Just(ActionKind::Search),
                Just(ActionKind::AskEach),
                Just(ActionKind::AskCollection),
                Just(ActionKind::Summarize)
            ],
            text(),
            prop::option::of(prop::collection::vec("[a-z0-9-]{1,10}", 1..3)),
            prop::option::of(text()),
        )
            .prop_map(|(kind, raw_query, scope, dimensions)| ActionSpec {
                kind,
                raw_query,
                scope: scope.map_or(Scope::AllDocuments, |ids| Scope::Documents(ids.into_iter().map(DocId).collect())),
                dimensions,
            })
    }

    fn status() -> impl Strategy<Value = ExecutionStatus> {
        prop_oneof![
            Just(ExecutionStatus::Unexecuted),
            Just(ExecutionStatus::Running),
            Just(ExecutionStatus::Completed),
            text().prop_map(|message| ExecutionStatus::Failed { message }),
        ]
    }

    fn content() -> impl Strategy<Value = CellContent> {
        prop_oneof![
            text().prop_map(|markup| CellContent::Text { markup }),
            (spec(), status(), prop::option::of(output()), prop::option::of(("[a-z:0-9]{1,12}", "[0-9a-f]{8}")))
                .prop_map(|(spec, status, output, key)| CellContent::Action {
                    spec,
                    status,
                    output,
                    index_key: key.map(|(provider_id, index_hash)| IndexKey { provider_id, index_hash }),
                }),
            (
                prop::collection::vec(text(), 0..3),
                prop::collection::vec(text(), 0..3),
                prop::option::of("cell-[a-f0-9]{6}"),
                prop_oneof![Just(SuggestionState::Pending), Just(SuggestionState::Accepted), Just(SuggestionState::Dismissed)],
            )
                .prop_map(|(searches, questions, after, state)| CellContent::Suggestion {
                    set: SuggestionSet { searches, questions, created_after_cell: after.map(CellId) },
                    state,
                }),
        ]
    }

    pub fn notebook() -> impl Strategy<Value = Notebook> {
        (
            prop::option::of(text()),
            prop::collection::vec((any::<bool>(), content()), 0..8),
            any::<u32>(),
        )
            .prop_map(|(goal, cells, revision)| {
                let n = cells.len() as u64;
                Notebook {
                    id: NotebookId::new(),
                    collection_id: CollectionId("col-test".into()),
                    goal,
                    cells: cells
                        .into_iter()
                        .enumerate()
                        .map(|(i, (hidden, content))| Cell { id: CellId::new(), hidden, created_seq: n - 1 - i as u64, content })
                        .collect(),
                    next_seq: n,
                    revision: revision as u64,
                }
            })
    }
}
