mod common;

use forage_core::corpus::{Collection, CorpusError, DocumentSource, SourceElement, MAX_CHUNK_CHARS};
use forage_core::index::{lexical_find, EmbeddingProvider, HashingEmbedder, VectorIndex};
use forage_core::text::{char_len, slice_chars};
use proptest::prelude::*;

fn token() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-z]{1,8}",
        2 => "[A-Z][a-z]{0,6}",
        1 => Just(". ".to_string()),
        1 => Just("? ".to_string()),
        1 => Just("; ".to_string()),
        1 => Just("\n".to_string()),
        1 => Just("\n\n".to_string()),
        1 => Just("Dr.".to_string()),
        1 => Just("e.g.".to_string()),
        1 => Just("café".to_string()),
        1 => Just("ÉCOLE".to_string()),
        1 => Just("\"Quoted.\"".to_string()),
        1 => Just("x".repeat(650)),
    ]
}

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec((token(), prop_oneof![Just(" "), Just("  "), Just(""), Just("\t")]), 1..80)
        .prop_map(|parts| parts.into_iter().map(|(t, s)| format!("{t}{s}")).collect::<String>())
        .prop_filter("needs content", |t| t.chars().any(|c| !c.is_whitespace()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn chunks_slice_order_and_reconstruct(body in text()) {
        let c = Collection::create("p", vec![DocumentSource::text("a.txt", body.clone())], None).unwrap();
        let doc = &c.documents[0];
        prop_assert_eq!(&doc.full_text, &body);
        let mut cursor = 0;
        let mut rebuilt = String::new();
        for (i, chunk) in doc.chunks.iter().enumerate() {
            prop_assert_eq!(chunk.index, i);
            prop_assert_eq!(slice_chars(&body, chunk.char_start, chunk.char_end).unwrap(), chunk.text.as_str());
            prop_assert!(chunk.char_start >= cursor);
            prop_assert!(char_len(&chunk.text) <= MAX_CHUNK_CHARS);
            prop_assert!(!chunk.text.trim().is_empty());
            let gap = slice_chars(&body, cursor, chunk.char_start).unwrap();
            prop_assert!(gap.chars().all(char::is_whitespace), "gap {:?}", gap);
            rebuilt.push_str(gap);
            rebuilt.push_str(&chunk.text);
            cursor = chunk.char_end;
        }
        let tail = slice_chars(&body, cursor, char_len(&body)).unwrap();
        prop_assert!(tail.chars().all(char::is_whitespace));
        rebuilt.push_str(tail);
        prop_assert_eq!(rebuilt, body);
    }

    #[test]
    fn element_chunks_stay_on_their_page(bodies in prop::collection::vec(text(), 1..5)) {
        let elements: Vec<SourceElement> = bodies
            .iter()
            .enumerate()
            .map(|(i, t)| SourceElement { text: t.clone(), page: 1 + i as u32 / 2 })
            .collect();
        let c = Collection::create("p", vec![DocumentSource::elements("a.pdf", elements.clone())], None).unwrap();
        let doc = &c.documents[0];
        prop_assert_eq!(&doc.full_text, &bodies.join("\n"));
        let mut start = 0;
        let bounds: Vec<(usize, usize, u32)> = elements
            .iter()
            .map(|e| {
                let b = (start, start + char_len(&e.text), e.page);
                start = b.1 + 1;
                b
            })
            .collect();
        for chunk in &doc.chunks {
            let owner = bounds.iter().find(|(s, e, _)| chunk.char_start >= *s && chunk.char_end <= *e);
            prop_assert!(owner.is_some(), "chunk {:?} crosses an element", chunk.text);
            prop_assert_eq!(chunk.page, Some(owner.unwrap().2));
        }
    }

    #[test]
    fn lexical_find_matches_naive_scan(body in text(), pick in 0usize..1000, len in 1usize..6, upper in any::<bool>()) {
        let c = Collection::create("p", vec![DocumentSource::text("a.txt", body.clone())], None).unwrap();
        let doc = &c.documents[0];
        let chars: Vec<char> = body.chars().collect();
        let start = pick % chars.len();
        let mut query: String = chars[start..(start + len).min(chars.len())].iter().collect();
        if upper {
            query = query.to_uppercase();
        }
        if query.trim().is_empty() {
            return Ok(());
        }
        let got: Vec<(usize, usize, usize)> =
            lexical_find(doc, &query, false).iter().map(|m| (m.chunk.index, m.match_start, m.match_end)).collect();
        prop_assert_eq!(got, naive_scan(doc, &query));
    }
}

/// First case-insensitive occurrence per chunk, by brute force.
fn naive_scan(doc: &forage_core::corpus::Document, query: &str) -> Vec<(usize, usize, usize)> {
    let lower = |c: char| c.to_lowercase().collect::<String>();
    let q: Vec<String> = query.chars().map(lower).collect();
    let mut out = Vec::new();
    for chunk in &doc.chunks {
        let t: Vec<String> = chunk.text.chars().map(lower).collect();
        if q.len() > t.len() {
            continue;
        }
        if let Some(i) = (0..=t.len() - q.len()).find(|&i| t[i..i + q.len()] == q[..]) {
            out.push((chunk.index, chunk.char_start + i, chunk.char_start + i + q.len()));
        }
    }
    out
}

#[test]
fn fixture_corpora_ingest_with_provenance() {
    for (name, count) in [("contracts", 10), ("resumes", 15)] {
        let c = common::corpus(name);
        assert_eq!(c.documents.len(), count);
        for doc in &c.documents {
            assert!(!doc.chunks.is_empty());
            for chunk in &doc.chunks {
                assert_eq!(slice_chars(&doc.full_text, chunk.char_start, chunk.char_end), Some(chunk.text.as_str()));
            }
        }
    }
}

#[test]
fn span_across_chunks_resolves_to_slice_and_first_page() {
    let c = common::corpus("contracts");
    let doc = &c.documents[0];
    let (a, b) = (&doc.chunks[2], &doc.chunks[5]);
    let (text, page) = c.resolve_span(&doc.id, a.char_start, b.char_end).unwrap();
    assert_eq!(text, slice_chars(&doc.full_text, a.char_start, b.char_end).unwrap());
    assert_eq!(page, a.page);
    let len = doc.char_len();
    assert_eq!(
        c.resolve_span(&doc.id, 0, len + 1),
        Err(CorpusError::SpanOutOfRange { start: 0, end: len + 1, len })
    );
}

#[test]
fn carpet_cleaning_lexical_hits() {
    let c = Collection::create(
        "cleaning",
        vec![
            DocumentSource::text("a.txt", "We offer window washing. Carpet Cleaning is billed hourly."),
            DocumentSource::text("b.txt", "Floors are mopped daily. No rugs."),
            DocumentSource::text("c.txt", "Deep carpet cleaning twice a year. Carpet cleaning supplies included."),
        ],
        None,
    )
    .unwrap();
    let hits: Vec<usize> = c.documents.iter().map(|d| lexical_find(d, "carpet cleaning", false).len()).collect();
    assert_eq!(hits, vec![1, 0, 2]);
    let m = &lexical_find(&c.documents[0], "carpet cleaning", false)[0];
    assert_eq!(slice_chars(&c.documents[0].full_text, m.match_start, m.match_end), Some("Carpet Cleaning"));
}

#[tokio::test]
async fn self_similarity_and_bounds() {
    let c = common::corpus("resumes");
    let embedder = HashingEmbedder::new();
    let index = VectorIndex::build(&c, &embedder, 4).await.unwrap();
    for doc in c.documents.iter().take(5) {
        for chunk in doc.chunks.iter().take(5) {
            let hits = index.semantic_topk(&embedder, &doc.id, &chunk.text, 30).await.unwrap();
            let own = hits.iter().find(|h| h.chunk_index == chunk.index).expect("own chunk retrieved");
            assert!((own.score - 1.0).abs() < 1e-6, "{}", own.score);
            assert!(hits.iter().all(|h| (-1.0..=1.0).contains(&h.score)));
            let again = index.semantic_topk(&embedder, &doc.id, &chunk.text, 30).await.unwrap();
            assert_eq!(hits, again);
        }
    }
    assert_eq!(embedder.provider_id(), index.provider_id);
}
