mod common;

use forage_core::corpus::{Collection, DocumentSource};
use forage_core::engine::{run_action, ActionContext, ActionSpec, EngineConfig};
use forage_core::llm::{MockBackend, PromptKind, SUGGESTION_MAX_TOKENS, SUGGESTION_TEMPERATURE};
use forage_core::notebook::{CellCommand, CellContent, CellId, NewCell, Notebook, NotebookError, ResultEdit, SuggestionState};
use forage_core::store::Store;
use forage_core::suggestions::{self, SuggestionItem, SuggestionItemKind};
use forage_core::table::{rebuild, TableError};
use proptest::prelude::*;

async fn add_and_run(nb: &mut Notebook, ctx: &ActionContext, spec: ActionSpec) -> CellId {
    let id = nb.apply(CellCommand::Create { position: None, cell: NewCell::Action { spec } }).unwrap();
    run_cell(nb, ctx, &id).await;
    id
}

async fn run_cell(nb: &mut Notebook, ctx: &ActionContext, id: &CellId) {
    let spec = nb.begin_execution(id).unwrap();
    let existing = rebuild(nb, &ctx.collection).existing_columns();
    let out = run_action(ctx, &spec, &existing).await.map_err(|e| e.to_string());
    nb.record_execution(id, out, Some(ctx.index.key())).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn notebooks_survive_save_and_load(nb in common::gen::notebook()) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.save_notebook(&nb).unwrap();
        prop_assert_eq!(store.load_notebook(&nb.id).unwrap(), nb);
    }
}

#[tokio::test]
async fn table_tracks_the_live_notebook() {
    let h = common::harness(common::corpus("contracts"), MockBackend::heuristic(), EngineConfig::default()).await;
    let mut nb = Notebook::new(h.ctx.collection.id.clone(), None);
    nb.apply(CellCommand::Create { position: None, cell: NewCell::Text { markup: "# Notes".into() } }).unwrap();
    let fees = add_and_run(&mut nb, &h.ctx, ActionSpec::search("monthly fee, payment terms")).await;
    let law = add_and_run(&mut nb, &h.ctx, ActionSpec::search("\"governing law\"")).await;
    let again = add_and_run(&mut nb, &h.ctx, ActionSpec::search("monthly fee")).await;

    let table = rebuild(&nb, &h.ctx.collection);
    assert_eq!(table.labels(), vec!["monthly fee", "payment terms", "governing law", "monthly fee (2)"]);
    assert_eq!(table.rows.len(), 10);
    assert!(table.rows.iter().all(|r| r.cells.iter().all(Option::is_some)));

    let doc = h.ctx.collection.documents[4].id.clone();
    nb.edit_result(&fees, &doc, "payment terms", ResultEdit::Replace("Net 15, \"firm\"".into())).unwrap();
    let table = rebuild(&nb, &h.ctx.collection);
    let cell = table.rows[4].cells[1].as_ref().unwrap();
    assert_eq!(cell.text, "Net 15, \"firm\"");
    assert!(cell.edited && cell.spans.is_empty());
    assert_eq!(
        nb.edit_result(&fees, &doc, "nope", ResultEdit::Remove),
        Err(NotebookError::UnknownColumn("nope".into()))
    );

    nb.apply(CellCommand::Hide { cell_id: law.clone() }).unwrap();
    assert_eq!(rebuild(&nb, &h.ctx.collection).labels().len(), 4);
    nb.apply(CellCommand::Delete { cell_id: law }).unwrap();
    let table = rebuild(&nb, &h.ctx.collection);
    assert_eq!(table.labels(), vec!["monthly fee", "payment terms", "monthly fee (2)"]);

    let view = table.view(Some(&["monthly fee (2)".into(), "payment terms".into()]), Some(&["payment terms".into()])).unwrap();
    assert_eq!(view.header(), vec!["filename", "payment terms", "monthly fee (2)"]);
    assert_eq!(table.view(Some(&["zzz".into()]), None), Err(TableError::UnknownColumn("zzz".into())));

    nb.apply(CellCommand::Clear { cell_id: again }).unwrap();
    assert_eq!(rebuild(&nb, &h.ctx.collection).labels(), vec!["monthly fee", "payment terms"]);
}

#[tokio::test]
async fn collection_answer_contributes_new_columns_only() {
    let h = common::harness(common::corpus("contracts"), MockBackend::heuristic(), EngineConfig::default()).await;
    let mut nb = Notebook::new(h.ctx.collection.id.clone(), None);
    add_and_run(&mut nb, &h.ctx, ActionSpec::search("monthly fee")).await;
    let ask = add_and_run(&mut nb, &h.ctx, ActionSpec::ask_collection("Termination notice period?")).await;
    let CellContent::Action { output: Some(out), .. } = &nb.cell(&ask).unwrap().content else { panic!("no output") };
    assert_eq!(out.table().columns, vec!["monthly fee", "termination notice period"]);
    assert_eq!(rebuild(&nb, &h.ctx.collection).labels(), vec!["monthly fee", "termination notice period"]);
}

#[tokio::test]
async fn suggestions_accept_and_feed_history() {
    let h = common::harness(common::corpus("resumes"), MockBackend::heuristic(), EngineConfig::default()).await;
    let mut nb = Notebook::new(h.ctx.collection.id.clone(), h.ctx.collection.goal.clone());
    add_and_run(&mut nb, &h.ctx, ActionSpec::search("python")).await;

    let set = suggestions::generate(&h.gateway, nb.goal.as_deref(), &h.ctx.collection, &nb.action_history()).await;
    assert!(!set.is_empty() && set.len() <= suggestions::MAX_DISPLAYED);
    assert!(!set.searches.iter().any(|s| s.eq_ignore_ascii_case("python")));
    let rev = nb.revision;
    let suggestion = suggestions::insert_suggestions(&mut nb, set.clone(), rev).unwrap();
    assert_eq!(nb.cells.last().unwrap().id, suggestion);

    let item = SuggestionItem { kind: SuggestionItemKind::Search, index: 0 };
    let accepted = suggestions::accept(&mut nb, &suggestion, item).unwrap();
    assert_eq!(nb.position(&accepted).unwrap(), nb.position(&suggestion).unwrap() + 1);
    assert!(matches!(
        suggestions::accept(&mut nb, &suggestion, item),
        Err(NotebookError::AlreadyResolved(_))
    ));
    run_cell(&mut nb, &h.ctx, &accepted).await;
    assert_eq!(nb.action_history().searches, vec!["python".to_string(), set.searches[0].clone()]);

    let log = h.gateway.audit_log();
    let sugg: Vec<_> = log.iter().filter(|a| a.kind == PromptKind::Suggestions).collect();
    assert_eq!(sugg.len(), 1);
    assert_eq!((sugg[0].temperature, sugg[0].max_tokens), (SUGGESTION_TEMPERATURE, SUGGESTION_MAX_TOKENS));

    let stale = nb.revision - 1;
    assert_eq!(suggestions::insert_suggestions(&mut nb, set.clone(), stale), None);
    let rev = nb.revision;
    let second = suggestions::insert_suggestions(&mut nb, set, rev).unwrap();
    suggestions::dismiss(&mut nb, &second).unwrap();
    let cell = nb.cell(&second).unwrap();
    assert!(cell.hidden);
    assert!(matches!(cell.content, CellContent::Suggestion { state: SuggestionState::Dismissed, .. }));
    assert!(!nb.render_list().iter().any(|c| c.id == second));
}

#[tokio::test]
async fn csv_round_trips_adversarial_cells() {
    let docs = vec![
        DocumentSource::text("plain.txt", "Rates are fixed."),
        DocumentSource::text("comma, name.txt", "Rates vary."),
        DocumentSource::text("quote \"q\".txt", "No rates."),
    ];
    let collection = Collection::create("adv", docs, None).unwrap();
    let h = common::harness(collection, MockBackend::heuristic(), EngineConfig::default()).await;
    let mut nb = Notebook::new(h.ctx.collection.id.clone(), None);
    let id = add_and_run(&mut nb, &h.ctx, ActionSpec::search("\"rates\", a \"quoted\" label")).await;
    let values = ["a, b", "say \"hi\"\nnext line", "\r\n,\"\","];
    for (doc, v) in h.ctx.collection.documents.iter().zip(values) {
        nb.edit_result(&id, &doc.id, "a \"quoted\" label", ResultEdit::Replace(v.into())).unwrap();
    }
    let table = rebuild(&nb, &h.ctx.collection);
    let csv = String::from_utf8(table.export_csv()).unwrap();
    let parsed = common::parse_csv(&csv);
    let mut expected = vec![table.header()];
    expected.extend(table.text_rows());
    assert_eq!(parsed, expected);
    assert_eq!(parsed[2][2], "say \"hi\"\nnext line");
    assert!(csv.ends_with("\r\n"));
}

#[tokio::test]
async fn three_queries_over_contracts_export_eleven_lines() {
    let h = common::harness(common::corpus("contracts"), MockBackend::heuristic(), EngineConfig::default()).await;
    let mut nb = Notebook::new(h.ctx.collection.id.clone(), None);
    for q in ["monthly fee", "payment terms", "\"governing law\""] {
        add_and_run(&mut nb, &h.ctx, ActionSpec::search(q)).await;
    }
    let csv = String::from_utf8(rebuild(&nb, &h.ctx.collection).export_csv()).unwrap();
    assert_eq!(csv.split_terminator("\r\n").count(), 11);
    let parsed = common::parse_csv(&csv);
    assert_eq!(parsed.len(), 11);
    assert!(parsed.iter().all(|r| r.len() == 4));
    assert_eq!(parsed[0], vec!["filename", "monthly fee", "payment terms", "governing law"]);
    assert_eq!(parsed[1][0], "contract_01.pdf");
}
