//! Plain-text rendering for the terminal.

use forage_core::corpus::Collection;
use forage_core::engine::{ActionOutput, ResultTable};
use forage_core::notebook::{CellContent, SuggestionSet};
use forage_core::table::AggregateTable;

/// Longest cell shown before eliding.
const MAX_CELL_CHARS: usize = 80;

fn clip(text: &str) -> String {
    let flat: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= MAX_CELL_CHARS {
        flat
    } else {
        let mut s: String = flat.chars().take(MAX_CELL_CHARS - 1).collect();
        s.push('…');
        s
    }
}

/// Aligned columns separated by ` | `, with a rule under the header.
pub fn grid(header: &[String], rows: &[Vec<String>]) -> String {
    let header: Vec<String> = header.iter().map(|h| clip(h)).collect();
    let rows: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|c| clip(c)).collect()).collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&header);
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    out.push('\n');
    for row in &rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

pub fn result_table(table: &ResultTable, collection: &Collection) -> String {
    let mut header = vec!["filename".to_string()];
    header.extend(table.columns.iter().cloned());
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            let name = collection.document(&r.doc_id).map(|d| d.filename.clone()).unwrap_or_else(|_| r.doc_id.0.clone());
            std::iter::once(name).chain(r.cells.iter().map(|c| c.display_text().to_string())).collect()
        })
        .collect();
    grid(&header, &rows)
}

/// Collection answers print the answer first, then the evidence table.
pub fn action_output(output: &ActionOutput, collection: &Collection) -> String {
    match output {
        ActionOutput::Table(t) => result_table(t, collection),
        ActionOutput::Answer(a) => format!("{}\n\n{}", a.answer, result_table(&a.evidence, collection)),
    }
}

pub fn aggregate(table: &AggregateTable) -> String {
    grid(&table.header(), &table.text_rows())
}

pub fn suggestions(set: &SuggestionSet) -> String {
    let mut out = String::new();
    for (i, s) in set.searches.iter().enumerate() {
        out.push_str(&format!("search {i}: {s}\n"));
    }
    for (i, q) in set.questions.iter().enumerate() {
        out.push_str(&format!("question {i}: {q}\n"));
    }
    out
}

pub fn suggestion_cell(content: &CellContent) -> String {
    match content {
        CellContent::Suggestion { set, .. } => suggestions(set),
        _ => String::new(),
    }
}
