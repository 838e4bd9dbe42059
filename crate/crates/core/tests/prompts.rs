mod common;

use forage_core::llm::{render_prompt, PromptKind, ASK_DOC_EXAMPLES};

#[test]
fn rendered_prompts_match_golden_files() {
    let cases = common::golden_cases();
    assert_eq!(cases.len(), PromptKind::ALL.len());
    for (kind, bindings, golden) in cases {
        let got = render_prompt(kind, &bindings).unwrap();
        assert_eq!(got, golden, "{kind:?}");
    }
}

#[test]
fn missing_binding_is_rejected() {
    for (kind, mut bindings, _) in common::golden_cases() {
        let first = kind.placeholders()[0];
        bindings.remove(first);
        assert!(render_prompt(kind, &bindings).is_err(), "{kind:?} without {first}");
    }
}

#[test]
fn examples_block_pairs_documents_with_answers() {
    let blocks: Vec<&str> = ASK_DOC_EXAMPLES.split("\n\n").collect();
    assert!(blocks.len() >= 2);
    for block in blocks {
        let lines: Vec<&str> = block.lines().collect();
        assert!(lines[0].starts_with("DOCUMENT: "));
        assert!(lines[1].starts_with("QUESTION: "));
        assert!(lines[2].starts_with("ANSWER: "));
    }
    assert!(ASK_DOC_EXAMPLES.contains("does not mention this information"));
}
