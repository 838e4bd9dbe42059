//! Deterministic sentence splitter with character-offset tracking.
//!
//! Boundary rules:
//! - `.`, `!`, `?`, `;` (and runs of them, plus trailing closing quotes or
//!   brackets) end a sentence when followed by end-of-text, or by whitespace
//!   whose next non-whitespace character is uppercase.
//! - A `.` closing a word from [`ABBREVIATIONS`] never ends a sentence.
//! - A newline ends a sentence unless the next non-whitespace character is a
//!   lowercase letter (a wrapped line). A blank line always ends one.
//! - Sentences longer than [`MAX_CHUNK_CHARS`] are wrapped at the last
//!   whitespace inside the limit, or cut hard when there is none.

/// Upper bound on the length of a single chunk, in characters.
pub const MAX_CHUNK_CHARS: usize = 600;

/// Lowercased words (with their trailing dot) that never end a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "mt.", "inc.", "ltd.", "co.",
    "corp.", "llc.", "bros.", "dept.", "univ.", "assn.", "e.g.", "i.e.", "etc.", "vs.", "approx.",
    "no.", "nos.", "art.", "sec.", "fig.", "vol.", "p.", "pp.", "jan.", "feb.", "mar.", "apr.",
    "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.", "u.s.", "a.m.", "p.m.",
];

const TERMINATORS: &[char] = &['.', '!', '?', ';'];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}', '\u{bb}'];

/// A sentence located in its source text by character offsets (end exclusive).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSpan {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

/// Split `text` into ordered, non-overlapping sentence spans.
pub fn split_sentences(text: &str) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let mut spans = Vec::new();
    let mut pos = 0;
    loop {
        let Some(start) = next_non_ws(&chars, pos) else {
            break;
        };
        let end = sentence_end(&chars, start);
        let trimmed_end = trim_end(&chars, start, end);
        wrap_long(&chars, start, trimmed_end, &mut spans);
        pos = end;
    }
    spans
}

fn next_non_ws(chars: &[char], from: usize) -> Option<usize> {
    (from..chars.len()).find(|&i| !chars[i].is_whitespace())
}

fn trim_end(chars: &[char], start: usize, mut end: usize) -> usize {
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    end
}

/// Exclusive end of the sentence beginning at `start` (before trimming).
fn sentence_end(chars: &[char], start: usize) -> usize {
    let n = chars.len();
    let mut i = start;
    while i < n {
        let c = chars[i];
        if c == '\n' && newline_breaks(chars, i) {
            return i;
        }
        if TERMINATORS.contains(&c) {
            let mut k = i + 1;
            while k < n && (TERMINATORS.contains(&chars[k]) || CLOSERS.contains(&chars[k])) {
                k += 1;
            }
            let lone_dot = c == '.' && k == i + 1;
            if !(lone_dot && is_abbreviation(chars, start, i)) && terminator_breaks(chars, k) {
                return k;
            }
            i = k;
            continue;
        }
        i += 1;
    }
    n
}

fn terminator_breaks(chars: &[char], after: usize) -> bool {
    if after >= chars.len() {
        return true;
    }
    if !chars[after].is_whitespace() {
        return false;
    }
    match next_non_ws(chars, after) {
        None => true,
        Some(j) => chars[j].is_uppercase(),
    }
}

fn newline_breaks(chars: &[char], at: usize) -> bool {
    let mut j = at + 1;
    while j < chars.len() && chars[j].is_whitespace() {
        if chars[j] == '\n' {
            return true;
        }
        j += 1;
    }
    match chars.get(j) {
        None => true,
        Some(next) => !next.is_lowercase(),
    }
}

/// Whether the word ending with the dot at `dot` is a known abbreviation.
fn is_abbreviation(chars: &[char], start: usize, dot: usize) -> bool {
    let mut from = dot;
    while from > start && !chars[from - 1].is_whitespace() {
        from -= 1;
    }
    let word: String = chars[from..=dot]
        .iter()
        .skip_while(|c| matches!(c, '(' | '[' | '"' | '\'' | '\u{201c}' | '\u{2018}'))
        .flat_map(|c| c.to_lowercase())
        .collect();
    ABBREVIATIONS.contains(&word.as_str())
}

fn wrap_long(chars: &[char], mut start: usize, end: usize, out: &mut Vec<SentenceSpan>) {
    while end - start > MAX_CHUNK_CHARS {
        let limit = start + MAX_CHUNK_CHARS;
        let cut = (start + 1..=limit).rev().find(|&i| chars[i].is_whitespace());
        let (piece_end, next) = match cut {
            Some(ws) => (trim_end(chars, start, ws), ws),
            None => (limit, limit),
        };
        push(chars, start, piece_end, out);
        start = next_non_ws(chars, next).unwrap_or(end).min(end);
    }
    if end > start {
        push(chars, start, end, out);
    }
}

fn push(chars: &[char], start: usize, end: usize, out: &mut Vec<SentenceSpan>) {
    out.push(SentenceSpan {
        text: chars[start..end].iter().collect(),
        char_start: start,
        char_end: end,
    });
}
