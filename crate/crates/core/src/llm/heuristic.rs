//! Deterministic keyword-overlap responses for offline runs.
//!
//! Reads the rendered prompt back apart and answers from the context it
//! carries: searches quote the best-matching context lines, questions answer
//! with one, attribute detection proposes the question itself, synthesis
//! counts covered rows, and suggestions pick frequent sample words.

use std::collections::{BTreeMap, HashSet};

use serde_json::json;

use super::prompt::PromptKind;
use super::ChatRequest;
use crate::engine::NOT_FOUND;

const STOPWORDS: &[&str] = &[
    "the", "and", "for", "with", "that", "this", "what", "which", "who", "does", "are", "was", "were", "any", "all",
    "from", "has", "have", "how", "its", "not", "per", "shall", "their", "there", "they", "will", "each", "other",
    "into", "than", "then", "them", "these", "those", "when", "where", "whom", "why", "can", "may", "document",
    "documents", "about", "say",
];

fn terms(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    text.split(|c: char| !c.is_alphanumeric())
        .map(str::to_lowercase)
        .filter(|t| t.chars().count() >= 3 && !STOPWORDS.contains(&t.as_str()))
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.rfind(start)? + start.len();
    let rest = &text[from..];
    Some(match rest.find(end) {
        Some(to) => &rest[..to],
        None => rest,
    })
}

fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Context lines ranked by how many query terms they contain.
fn best_lines(context: &str, query: &str, max: usize) -> Vec<String> {
    let wanted = terms(query);
    let mut scored: Vec<(usize, usize, &str)> = context
        .split('\n')
        .enumerate()
        .filter_map(|(i, line)| {
            let have: HashSet<String> = terms(line).into_iter().collect();
            let score = wanted.iter().filter(|t| have.contains(*t)).count();
            (score > 0 && !line.trim().is_empty()).then_some((score, i, line))
        })
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(max).map(|(_, _, l)| collapse(l)).collect()
}

/// A response for `request`, or `None` if the prompt is not recognized.
pub fn heuristic_response(request: &ChatRequest) -> Option<String> {
    let p = request.prompt.as_str();
    Some(match request.kind {
        PromptKind::Search => {
            let context = between(p, "DOCUMENT: ", "\nQUERY: Search for \"")?;
            let query = p.rsplit_once("\nQUERY: Search for \"")?.1.strip_suffix('"')?;
            json!({ "snippets": best_lines(context, query, 2) }).to_string()
        }
        PromptKind::AskDoc => {
            let context = between(p, "DOCUMENT: ", "\nQUESTION: ")?;
            let question = between(p, "\nQUESTION: ", "\nANSWER:")?;
            best_lines(context, question, 1)
                .pop()
                .unwrap_or_else(|| "The document does not mention this information.".to_string())
        }
        PromptKind::DetectAttributes => {
            let columns = between(p, "Current attributes: ", "\nQuestion: ")?;
            let question = between(p, "\nQuestion: ", "\u{0}")?.trim().trim_end_matches('?').to_lowercase();
            let existing: Vec<String> = serde_json::from_str::<Vec<String>>(columns)
                .unwrap_or_default()
                .iter()
                .map(|c| c.to_lowercase())
                .collect();
            let attrs: Vec<String> = if existing.contains(&question) { vec![] } else { vec![question] };
            json!(attrs).to_string()
        }
        PromptKind::Synthesize => {
            let table = between(p, "Table: ", "\nQuestion: ")?;
            let rows: Vec<&str> = table.lines().skip(1).collect();
            if rows.is_empty() {
                return Some("I don't know".to_string());
            }
            let covered = rows
                .iter()
                .filter(|r| r.split(" | ").skip(1).any(|c| !c.trim().is_empty() && c.trim() != NOT_FOUND))
                .count();
            format!("Based on the table, {covered} of {} documents contain relevant information.", rows.len())
        }
        PromptKind::Suggestions => {
            let samples = between(p, "they have).\n\n", "\n\nThe user has previously searched")?;
            let searched = between(p, "searched for the following things within their documents: ", "\n")?;
            let asked = between(p, "asked the following questions of their documents: ", "\n")?;
            let history = terms(&format!("{searched} {asked}"));
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for t in samples.split(|c: char| !c.is_alphanumeric()).map(str::to_lowercase) {
                if t.chars().count() >= 5 && t.chars().all(char::is_alphabetic) && !STOPWORDS.contains(&t.as_str()) {
                    *counts.entry(t).or_default() += 1;
                }
            }
            let mut ranked: Vec<(String, usize)> =
                counts.into_iter().filter(|(t, _)| !history.contains(t) && t != "sample").collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let top: Vec<String> = ranked.into_iter().take(3).map(|(t, _)| t).collect();
            let searches: Vec<&String> = top.iter().take(2).collect();
            let questions: Vec<String> =
                top.iter().skip(2).map(|t| format!("What does the document say about {t}?")).collect();
            json!({ "suggested_searches": searches, "suggested_questions": questions }).to_string()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{format_list, format_samples, format_table, render_prompt};

    fn request(kind: PromptKind, pairs: &[(&str, String)]) -> ChatRequest {
        let b: crate::llm::Bindings = pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        ChatRequest::new(kind, render_prompt(kind, &b).unwrap())
    }

    #[test]
    fn search_quotes_context_lines() {
        let r = request(
            PromptKind::Search,
            &[
                ("Context", "Fees are $10.\nPayment is due within  30 days.\nGoverned by Texas law.".into()),
                ("Query", "payment due".into()),
            ],
        );
        let out = heuristic_response(&r).unwrap();
        assert_eq!(out, r#"{"snippets":["Payment is due within 30 days."]}"#);
    }

    #[test]
    fn ask_doc_falls_back_to_not_mentioned() {
        let r = request(
            PromptKind::AskDoc,
            &[("Examples", "x".into()), ("Context", "Nothing here.".into()), ("Question", "Who signed?".into())],
        );
        assert_eq!(heuristic_response(&r).unwrap(), "The document does not mention this information.");
    }

    #[test]
    fn detect_and_synthesize() {
        let r = request(
            PromptKind::DetectAttributes,
            &[("Goal", "g".into()), ("Columns", format_list(&["fees"])), ("Question", "Payment terms?".into())],
        );
        assert_eq!(heuristic_response(&r).unwrap(), r#"["payment terms"]"#);
        let table = format_table(
            &["Document", "fees"],
            &[vec!["a".into(), "$10".into()], vec!["b".into(), NOT_FOUND.into()]],
        );
        let r = request(PromptKind::Synthesize, &[("Table", table), ("Question", "q".into())]);
        assert_eq!(
            heuristic_response(&r).unwrap(),
            "Based on the table, 1 of 2 documents contain relevant information."
        );
    }

    #[test]
    fn suggestions_skip_history() {
        let r = request(
            PromptKind::Suggestions,
            &[
                ("Goal", "g".into()),
                ("Samples", format_samples(&["renewal renewal notice notice notice invoice"])),
                ("Searches", format_list(&["notice"])),
                ("Questions", format_list::<String>(&[])),
            ],
        );
        let out: serde_json::Value = serde_json::from_str(&heuristic_response(&r).unwrap()).unwrap();
        assert_eq!(out["suggested_searches"], json!(["renewal", "invoice"]));
    }
}
