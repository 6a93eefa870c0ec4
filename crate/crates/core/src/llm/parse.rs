use crate::graph::NodeKind;
use crate::tasks::{word_count, GenerationConstraints};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("reply contained no results")]
    Empty,
    #[error("expected {expected} results, got {got}")]
    Count { expected: usize, got: usize },
    #[error("result {index} has {words} words, limit is {max}")]
    TooManyWords { index: usize, words: usize, max: usize },
}

const QUOTES: &[char] = &['"', '\'', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}', '`'];

/// Strips a list marker ("1.", "2)", "-", "*", "•") from the start of a line.
fn strip_marker(line: &str) -> Option<&str> {
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            if r.is_empty() || r.starts_with(char::is_whitespace) {
                return Some(r);
            }
        }
        return None;
    }
    for bullet in ['-', '*', '\u{2022}'] {
        if let Some(r) = line.strip_prefix(bullet) {
            if r.is_empty() || r.starts_with(char::is_whitespace) {
                return Some(r);
            }
        }
    }
    None
}

fn clean(s: &str) -> String {
    s.trim().trim_matches(QUOTES).trim().to_string()
}

/// Splits a reply into items. Marked lines win over bare lines, so a chatty
/// preamble before a numbered list is ignored.
fn items(text: &str) -> Vec<String> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let marked: Vec<&str> = lines.iter().filter_map(|l| strip_marker(l)).collect();
    let chosen = if marked.is_empty() { lines } else { marked };
    chosen.into_iter().map(clean).filter(|s| !s.is_empty()).collect()
}

fn check(items: Vec<String>, expected: usize, max: usize) -> Result<Vec<String>, ParseError> {
    if items.is_empty() {
        return Err(ParseError::Empty);
    }
    if items.len() != expected {
        return Err(ParseError::Count { expected, got: items.len() });
    }
    for (index, item) in items.iter().enumerate() {
        let words = word_count(item);
        if words > max {
            return Err(ParseError::TooManyWords { index, words, max });
        }
    }
    Ok(items)
}

/// Parses a model reply into the results an output type requires.
pub fn parse_generations(text: &str, output: NodeKind) -> Result<Vec<String>, ParseError> {
    let c = GenerationConstraints::for_output(output);
    match output {
        NodeKind::StickyNote => {
            let whole = clean(text);
            let whole = if whole.is_empty() { vec![] } else { vec![whole] };
            check(whole, c.count, c.max_words)
        }
        _ => check(items(text), c.count, c.max_words),
    }
}

/// Parses a reply that should hold exactly one result of the given type.
pub fn parse_single(text: &str, output: NodeKind) -> Result<String, ParseError> {
    let c = GenerationConstraints::for_output(output);
    let found = match output {
        NodeKind::StickyNote => parse_generations(text, output)?,
        _ => check(items(text), 1, c.max_words)?,
    };
    Ok(found.into_iter().next().expect("one item"))
}

/// Renders results the way the constraint suffix asks the model to.
pub fn format_generations(items: &[String]) -> String {
    items.iter().enumerate().map(|(i, s)| format!("{}. {}", i + 1, s)).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn numbered_keyword_list() {
        let got = parse_generations("1. open road\n2. horizon\n3. wanderlust", NodeKind::Keyword).unwrap();
        assert_eq!(got, vec!["open road", "horizon", "wanderlust"]);
    }

    #[test]
    fn bullets_bare_lines_and_quotes() {
        let got = parse_generations("- \"open road\"\n* horizon\n• wanderlust", NodeKind::Keyword).unwrap();
        assert_eq!(got, vec!["open road", "horizon", "wanderlust"]);
        let bare = parse_generations("alpha\n\n beta \ngamma", NodeKind::Concept).unwrap();
        assert_eq!(bare, vec!["alpha", "beta", "gamma"]);
        let chatty = parse_generations("Sure! Here you go:\n1) a\n2) b\n3) c", NodeKind::Keyword).unwrap();
        assert_eq!(chatty, vec!["a", "b", "c"]);
    }

    #[test]
    fn count_and_length_violations() {
        assert_eq!(
            parse_generations("1. a\n2. b", NodeKind::Keyword),
            Err(ParseError::Count { expected: 3, got: 2 })
        );
        assert!(matches!(
            parse_generations("1. a b c d\n2. b\n3. c", NodeKind::Keyword),
            Err(ParseError::TooManyWords { index: 0, words: 4, max: 3 })
        ));
        assert!(parse_generations("1. a b c d\n2. b\n3. c", NodeKind::Concept).is_ok());
        assert_eq!(parse_generations("  ", NodeKind::Keyword), Err(ParseError::Empty));
    }

    #[test]
    fn sticky_note_word_limit() {
        let ok = vec!["w"; 150].join(" ");
        assert_eq!(parse_generations(&ok, NodeKind::StickyNote).unwrap(), vec![ok.clone()]);
        let long = vec!["w"; 151].join(" ");
        assert!(matches!(
            parse_generations(&long, NodeKind::StickyNote),
            Err(ParseError::TooManyWords { words: 151, .. })
        ));
        let multi = "First line.\nSecond line.";
        assert_eq!(parse_generations(multi, NodeKind::StickyNote).unwrap(), vec![multi.to_string()]);
    }

    #[test]
    fn numbers_inside_items_survive() {
        assert_eq!(parse_single("1. 1990s music", NodeKind::Keyword).unwrap(), "1990s music");
        assert_eq!(parse_single("2024 plans", NodeKind::Keyword).unwrap(), "2024 plans");
    }

    fn word() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9]{0,7}"
    }

    fn item(max: usize) -> impl Strategy<Value = String> {
        proptest::collection::vec(word(), 1..=max).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn format_then_parse_is_identity(kind in prop_oneof![Just(NodeKind::Keyword), Just(NodeKind::Concept)],
                                         items in proptest::collection::vec(item(5), 3)) {
            let max = GenerationConstraints::for_output(kind).max_words;
            prop_assume!(items.iter().all(|i| word_count(i) <= max));
            prop_assert_eq!(parse_generations(&format_generations(&items), kind).unwrap(), items);
        }
    }
}
