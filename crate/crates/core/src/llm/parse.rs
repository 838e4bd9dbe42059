//! Lenient parsers for structured model responses.

use serde_json::Value;

use super::GatewayError;

/// Find the first balanced `open`..`close` region that parses as JSON,
/// skipping brackets inside string literals.
fn first_balanced(text: &str, open: char, close: char) -> Option<Value> {
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    for (start_pos, &(start, c)) in bytes.iter().enumerate() {
        if c != open {
            continue;
        }
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        for &(idx, ch) in &bytes[start_pos..] {
            if in_str {
                match ch {
                    _ if escaped => escaped = false,
                    '\\' => escaped = true,
                    '"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match ch {
                '"' => in_str = true,
                _ if ch == open => depth += 1,
                _ if ch == close => {
                    depth -= 1;
                    if depth == 0 {
                        let candidate = &text[start..idx + ch.len_utf8()];
                        if let Ok(value) = serde_json::from_str(candidate) {
                            return Some(value);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    None
}

fn unparseable(what: &str, text: &str) -> GatewayError {
    let preview: String = text.chars().take(120).collect();
    GatewayError::UnparseableResponse(format!("{what}: {preview:?}"))
}

fn string_list(value: &Value) -> Option<Vec<String>> {
    value
        .as_array()?
        .iter()
        .map(|v| v.as_str().map(str::to_string))
        .collect()
}

/// `{"snippets": [...]}`, possibly surrounded by prose.
pub fn parse_snippets(response: &str) -> Result<Vec<String>, GatewayError> {
    first_balanced(response, '{', '}')
        .as_ref()
        .and_then(|obj| obj.get("snippets"))
        .and_then(string_list)
        .ok_or_else(|| unparseable("expected {\"snippets\": [..]}", response))
}

/// `{"suggested_searches": [...], "suggested_questions": [...]}`; a missing
/// key yields an empty list.
pub fn parse_suggestions(response: &str) -> Result<(Vec<String>, Vec<String>), GatewayError> {
    let obj = first_balanced(response, '{', '}')
        .filter(Value::is_object)
        .ok_or_else(|| unparseable("expected a suggestions object", response))?;
    let field = |key: &str| match obj.get(key) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(v) => string_list(v).ok_or_else(|| unparseable(key, response)),
    };
    Ok((field("suggested_searches")?, field("suggested_questions")?))
}

const BULLETS: &[&str] = &["- ", "* ", "\u{2022} "];

fn strip_bullet(line: &str) -> Option<&str> {
    let line = line.trim();
    if let Some(rest) = BULLETS.iter().find_map(|b| line.strip_prefix(b)) {
        return Some(rest);
    }
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        return rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") "));
    }
    None
}

fn clean_item(item: &str) -> String {
    item.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim().to_string()
}

/// A JSON string list (bare, or the first list inside an object), falling
/// back to a bulleted or single-line comma-separated list.
pub fn parse_attributes(response: &str) -> Result<Vec<String>, GatewayError> {
    let json_list = first_balanced(response, '[', ']')
        .as_ref()
        .and_then(string_list)
        .or_else(|| {
            let obj = first_balanced(response, '{', '}')?;
            obj.as_object()?.values().find_map(string_list)
        });
    let items = match json_list {
        Some(items) => items,
        None => {
            let bulleted: Vec<&str> = response.lines().filter_map(strip_bullet).collect();
            let trimmed = response.trim();
            if !bulleted.is_empty() {
                bulleted.into_iter().map(str::to_string).collect()
            } else if !trimmed.is_empty()
                && !trimmed.contains('\n')
                && !trimmed.ends_with('.')
                && trimmed.chars().count() <= 200
            {
                trimmed.split(',').map(str::to_string).collect()
            } else {
                return Err(unparseable("expected a list of attributes", response));
            }
        }
    };
    Ok(items.iter().map(|s| clean_item(s)).filter(|s| !s.is_empty()).collect())
}

/// Comparison form of an attribute or column name.
pub fn normalize_attribute(name: &str) -> String {
    crate::text::normalize_whitespace(name).to_lowercase()
}
