use serde::{Deserialize, Serialize};

use super::ActionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Lexical,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPart {
    pub text: String,
    pub mode: MatchMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedQuery {
    pub parts: Vec<QueryPart>,
}

/// Split a raw search query on top-level commas. A part wrapped in double
/// quotes is lexical (quotes stripped); anything else is semantic. Commas
/// inside quotes do not split.
pub fn parse_query(raw: &str) -> Result<ParsedQuery, ActionError> {
    let mut pieces = Vec::new();
    let mut current = String::new();
    let mut in_quotes = false;
    for ch in raw.chars() {
        match ch {
            '"' => {
                in_quotes = !in_quotes;
                current.push(ch);
            }
            ',' if !in_quotes => pieces.push(std::mem::take(&mut current)),
            _ => current.push(ch),
        }
    }
    pieces.push(current);

    let parts: Vec<QueryPart> = pieces
        .iter()
        .map(|p| p.trim())
        .filter_map(|p| {
            let quoted = p.len() >= 2 && p.starts_with('"') && p.ends_with('"');
            let (text, mode) = if quoted {
                (p[1..p.len() - 1].trim(), MatchMode::Lexical)
            } else {
                (p, MatchMode::Semantic)
            };
            (!text.is_empty()).then(|| QueryPart { text: text.to_string(), mode })
        })
        .collect();
    if parts.is_empty() {
        return Err(ActionError::EmptyQuery);
    }
    Ok(ParsedQuery { parts })
}
