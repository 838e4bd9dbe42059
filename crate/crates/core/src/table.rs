//! The aggregate table: every executed query column, one row per document.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Collection, DocId};
use crate::engine::{ActionOutput, ExistingColumn, ResultCell};
use crate::notebook::{CellContent, CellId, Notebook};

/// Header of the leading filename column.
pub const FILENAME_COLUMN: &str = "filename";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateColumn {
    pub label: String,
    pub origin_cell: CellId,
    pub origin_column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub doc_id: DocId,
    pub filename: String,
    /// One entry per column; `None` where the action did not cover this document.
    pub cells: Vec<Option<ResultCell>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub columns: Vec<AggregateColumn>,
    pub rows: Vec<AggregateRow>,
}

fn unique_label(base: &str, used: &mut HashSet<String>) -> String {
    let mut label = base.to_string();
    let mut n = 2;
    while used.contains(&label) {
        label = format!("{base} ({n})");
        n += 1;
    }
    used.insert(label.clone());
    label
}

/// Derive the table from the live notebook: executed action cells in
/// notebook order (hidden included), columns in per-cell order. Collection
/// answers contribute only the columns they searched, not their answer.
pub fn rebuild(notebook: &Notebook, collection: &Collection) -> AggregateTable {
    let mut used = HashSet::from([FILENAME_COLUMN.to_string()]);
    let mut columns = Vec::new();
    let mut rows: Vec<AggregateRow> = collection
        .documents
        .iter()
        .map(|d| AggregateRow { doc_id: d.id.clone(), filename: d.filename.clone(), cells: Vec::new() })
        .collect();

    for cell in notebook.cells.iter().filter(|c| c.is_executed()) {
        let CellContent::Action { output: Some(output), .. } = &cell.content else {
            continue;
        };
        let (table, included): (_, Vec<usize>) = match output {
            ActionOutput::Table(t) => (t, (0..t.columns.len()).collect()),
            ActionOutput::Answer(a) => {
                let searched: HashSet<&str> = a.new_attributes().collect();
                let idx = (0..a.evidence.columns.len())
                    .filter(|&i| searched.contains(a.evidence.columns[i].as_str()))
                    .collect();
                (&a.evidence, idx)
            }
        };
        for col in included {
            columns.push(AggregateColumn {
                label: unique_label(&table.columns[col], &mut used),
                origin_cell: cell.id.clone(),
                origin_column: col,
            });
            for row in rows.iter_mut() {
                row.cells.push(table.row(&row.doc_id).and_then(|r| r.cells.get(col)).cloned());
            }
        }
    }
    AggregateTable { columns, rows }
}

impl AggregateTable {
    pub fn labels(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.label.as_str()).collect()
    }

    pub fn header(&self) -> Vec<String> {
        std::iter::once(FILENAME_COLUMN.to_string()).chain(self.columns.iter().map(|c| c.label.clone())).collect()
    }

    /// A projection keeping `filter` columns (all when `None`), with the
    /// columns named in `order` moved to the front in that order. The
    /// filename column always stays first.
    pub fn view(&self, filter: Option<&[String]>, order: Option<&[String]>) -> Result<AggregateTable, TableError> {
        let find = |label: &str| {
            self.columns
                .iter()
                .position(|c| c.label == label)
                .ok_or_else(|| TableError::UnknownColumn(label.to_string()))
        };
        let mut picked: Vec<usize> = match filter {
            Some(labels) => labels.iter().map(|l| find(l)).collect::<Result<_, _>>()?,
            None => (0..self.columns.len()).collect(),
        };
        let mut seen = HashSet::new();
        picked.retain(|i| seen.insert(*i));
        if let Some(order) = order {
            let wanted: Vec<usize> = order.iter().map(|l| find(l)).collect::<Result<_, _>>()?;
            let mut front: Vec<usize> = Vec::new();
            for i in wanted {
                if picked.contains(&i) && !front.contains(&i) {
                    front.push(i);
                }
            }
            let rest = picked.iter().copied().filter(|i| !front.contains(i));
            picked = front.iter().copied().chain(rest).collect();
        }
        Ok(AggregateTable {
            columns: picked.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| AggregateRow {
                    doc_id: r.doc_id.clone(),
                    filename: r.filename.clone(),
                    cells: picked.iter().map(|&i| r.cells[i].clone()).collect(),
                })
                .collect(),
        })
    }

    /// Columns offered to collection QA for reuse.
    pub fn existing_columns(&self) -> Vec<ExistingColumn> {
        self.columns
            .iter()
            .enumerate()
            .map(|(i, c)| ExistingColumn {
                name: c.label.clone(),
                cells: self
                    .rows
                    .iter()
                    .filter_map(|r| r.cells[i].clone().map(|cell| (r.doc_id.clone(), cell)))
                    .collect(),
            })
            .collect()
    }

    /// Plain text of every row, filename first; uncovered cells are empty.
    pub fn text_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                std::iter::once(r.filename.clone())
                    .chain(r.cells.iter().map(|c| c.as_ref().map(|c| c.text.clone()).unwrap_or_default()))
                    .collect()
            })
            .collect()
    }

    /// CSV: UTF-8, comma-delimited, CRLF records, header of column labels,
    /// cell text only.
    pub fn export_csv(&self) -> Vec<u8> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(Vec::new());
        writer.write_record(self.header()).expect("in-memory write");
        for row in self.text_rows() {
            writer.write_record(row).expect("in-memory write");
        }
        writer.into_inner().expect("in-memory flush")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(labels: &[&str]) -> AggregateTable {
        AggregateTable {
            columns: labels
                .iter()
                .enumerate()
                .map(|(i, l)| AggregateColumn { label: l.to_string(), origin_cell: CellId("c".into()), origin_column: i })
                .collect(),
            rows: vec![AggregateRow {
                doc_id: "d".into(),
                filename: "a.pdf".into(),
                cells: labels.iter().map(|l| Some(ResultCell::generated(format!("{l}!"), vec![]))).collect(),
            }],
        }
    }

    #[test]
    fn labels_dedupe() {
        let mut used = HashSet::from(["filename".to_string()]);
        assert_eq!(unique_label("fees", &mut used), "fees");
        assert_eq!(unique_label("fees", &mut used), "fees (2)");
        assert_eq!(unique_label("fees", &mut used), "fees (3)");
        assert_eq!(unique_label("filename", &mut used), "filename (2)");
    }

    #[test]
    fn view_filters_and_orders() {
        let t = table(&["a", "b", "c"]);
        assert_eq!(t.view(None, None).unwrap(), t);
        let v = t.view(Some(&["b".into()]), None).unwrap();
        assert_eq!(v.header(), vec!["filename", "b"]);
        let v = t.view(None, Some(&["c".into(), "a".into()])).unwrap();
        assert_eq!(v.labels(), vec!["c", "a", "b"]);
        assert_eq!(v.rows[0].cells[0].as_ref().unwrap().text, "c!");
        assert_eq!(t.view(Some(&["zz".into()]), None), Err(TableError::UnknownColumn("zz".into())));
        assert_eq!(t, table(&["a", "b", "c"]));
    }

    #[test]
    fn csv_quoting() {
        let mut t = table(&["terms"]);
        t.rows[0].cells[0] = Some(ResultCell::generated("Net 30, invoiced", vec![]));
        let csv = String::from_utf8(t.export_csv()).unwrap();
        assert_eq!(csv, "filename,terms\r\na.pdf,\"Net 30, invoiced\"\r\n");
        t.rows[0].cells[0] = Some(ResultCell::generated("say \"hi\"\nbye", vec![]));
        let csv = String::from_utf8(t.export_csv()).unwrap();
        assert_eq!(csv, "filename,terms\r\na.pdf,\"say \"\"hi\"\"\nbye\"\r\n");
    }
}
