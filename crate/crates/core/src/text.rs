//! Character-offset helpers shared by the corpus and the action engine.
//!
//! All document offsets are counted in Unicode scalar values, never bytes.

/// Number of Unicode scalar values in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte offset of the `char_idx`-th scalar value, or `text.len()` at the end.
fn byte_offset(text: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut count = 0;
    for (byte, _) in text.char_indices() {
        if count == char_idx {
            return Some(byte);
        }
        count += 1;
    }
    (count == char_idx).then_some(text.len())
}

/// Slice `text` by character offsets `[start, end)`.
pub fn slice_chars(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let from = byte_offset(text, start)?;
    let to = from + byte_offset(&text[from..], end - start)?;
    Some(&text[from..to])
}

/// Collapse every run of whitespace into a single space and trim both ends.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Whitespace-normalized view of a document that remembers, for every
/// normalized character, the character offset it came from.
#[derive(Debug, Clone)]
pub struct NormalizedText {
    pub chars: Vec<char>,
    pub origin: Vec<usize>,
}

impl NormalizedText {
    pub fn new(text: &str) -> Self {
        let mut chars = Vec::new();
        let mut origin = Vec::new();
        let mut pending_space: Option<usize> = None;
        for (idx, ch) in text.chars().enumerate() {
            if ch.is_whitespace() {
                if !chars.is_empty() && pending_space.is_none() {
                    pending_space = Some(idx);
                }
                continue;
            }
            if let Some(space_at) = pending_space.take() {
                chars.push(' ');
                origin.push(space_at);
            }
            chars.push(ch);
            origin.push(idx);
        }
        Self { chars, origin }
    }

    /// Every start position (in normalized coordinates) where `needle` occurs.
    pub fn find_all(&self, needle: &[char]) -> Vec<usize> {
        if needle.is_empty() || needle.len() > self.chars.len() {
            return Vec::new();
        }
        self.chars
            .windows(needle.len())
            .enumerate()
            .filter_map(|(pos, window)| (window == needle).then_some(pos))
            .collect()
    }

    /// Map a normalized match `[pos, pos + len)` back to original offsets.
    /// The match must start and end on non-space characters.
    pub fn original_span(&self, pos: usize, len: usize) -> (usize, usize) {
        (self.origin[pos], self.origin[pos + len - 1] + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slicing_counts_scalar_values() {
        let text = "héllo wörld";
        assert_eq!(slice_chars(text, 0, 5), Some("héllo"));
        assert_eq!(slice_chars(text, 6, 11), Some("wörld"));
        assert_eq!(slice_chars(text, 6, 12), None);
        assert_eq!(slice_chars(text, 11, 11), Some(""));
    }

    #[test]
    fn normalization_collapses_runs() {
        assert_eq!(normalize_whitespace("  a \n\t b  c "), "a b c");
        assert_eq!(normalize_whitespace("   "), "");
    }

    #[test]
    fn normalized_text_maps_back() {
        let text = "  Net\n  30   days.";
        let norm = NormalizedText::new(text);
        let s: String = norm.chars.iter().collect();
        assert_eq!(s, "Net 30 days.");
        let needle: Vec<char> = "30 days".chars().collect();
        let pos = norm.find_all(&needle)[0];
        let (start, end) = norm.original_span(pos, needle.len());
        assert_eq!(slice_chars(text, start, end), Some("30   days"));
    }
}
