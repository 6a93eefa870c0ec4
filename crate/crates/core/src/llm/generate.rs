use serde::{Deserialize, Serialize};

use super::{complete, CompletionParams, Dialogue, LlmError, ParseError, Provider};
use crate::graph::NodeKind;
use crate::ids::NodeId;
use crate::state::GenerationResult;
use crate::tasks::word_count;

pub const KEY_POINT_MAX_WORDS: usize = 5;
pub const SUMMARY_MAX_WORDS: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPoints {
    pub key_point: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerateError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("unusable reply: {0}")]
    Parse(#[from] ParseError),
}

fn first_words(text: &str, n: usize) -> String {
    text.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

pub fn summary_request(text: &str) -> String {
    format!(
        "Give a key point of at most {KEY_POINT_MAX_WORDS} words and a summary of at most {SUMMARY_MAX_WORDS} words \
         for the text below. Answer in two lines starting with \"Key point:\" and \"Summary:\".\n\n{text}"
    )
}

pub fn feedback_request(text: &str, feedback: super::Feedback) -> String {
    format!("Regarding \"{text}\": {} Regenerate one result under the same constraints.", feedback.instruction())
}

pub fn explain_request(text: &str) -> String {
    format!("Regarding \"{text}\": Explain briefly why you generated this result.")
}

fn labelled<'a>(reply: &'a str, label: &str) -> Option<&'a str> {
    reply.lines().map(str::trim).find_map(|l| {
        let head = l.get(..label.len())?;
        head.eq_ignore_ascii_case(label).then(|| l[label.len()..].trim())
    })
}

fn parse_key_points(reply: &str) -> Option<KeyPoints> {
    let key_point = labelled(reply, "key point:")?.to_string();
    let summary = labelled(reply, "summary:")?.to_string();
    let fits = |s: &str, max| !s.is_empty() && word_count(s) <= max;
    (fits(&key_point, KEY_POINT_MAX_WORDS) && fits(&summary, SUMMARY_MAX_WORDS)).then_some(KeyPoints { key_point, summary })
}

/// Header text for a result. Short outputs are summarised by rule; a sticky
/// note costs one extra model call and falls back to truncation if that fails.
pub fn summarize_result(
    provider: &dyn Provider,
    generations: &[String],
    output: NodeKind,
    params: &CompletionParams,
) -> KeyPoints {
    let first = generations.first().map(String::as_str).unwrap_or_default();
    if output != NodeKind::StickyNote {
        return KeyPoints {
            key_point: first.to_string(),
            summary: generations.join(", "),
        };
    }
    let asked = complete(provider, &Dialogue::with_user(summary_request(first)), params)
        .ok()
        .and_then(|reply| parse_key_points(&reply));
    asked.unwrap_or_else(|| {
        let mut kp = KeyPoints {
            key_point: first_words(first, KEY_POINT_MAX_WORDS),
            summary: first_words(first, SUMMARY_MAX_WORDS),
        };
        if kp.key_point.is_empty() {
            kp.key_point = "(result)".into();
            kp.summary = "(result)".into();
        }
        kp
    })
}

/// Runs one dispatched request end to end: completion, parsing, summary.
pub fn execute_dispatch(
    provider: &dyn Provider,
    dialogue: &Dialogue,
    output: NodeKind,
    partner: Option<NodeId>,
    params: &CompletionParams,
) -> Result<GenerationResult, GenerateError> {
    let reply = complete(provider, dialogue, params)?;
    let candidates = super::parse_generations(&reply, output)?;
    let KeyPoints { key_point, summary } = summarize_result(provider, &candidates, output, params);
    let mut dialogue = dialogue.clone();
    dialogue.push_assistant(reply).expect("dialogue awaited a reply");
    Ok(GenerationResult { output, candidates, key_point, summary, dialogue, partner })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::MockProvider;

    struct Down;
    impl Provider for Down {
        fn complete(&self, _: &Dialogue, _: &CompletionParams) -> Result<String, LlmError> {
            Err(LlmError::Timeout)
        }
    }

    #[test]
    fn rule_based_summary_for_keywords() {
        let gens: Vec<String> = ["open road", "horizon", "wanderlust"].map(String::from).to_vec();
        let kp = summarize_result(&Down, &gens, NodeKind::Keyword, &CompletionParams::default());
        assert_eq!(kp.key_point, "open road");
        assert_eq!(kp.summary, "open road, horizon, wanderlust");
    }

    fn story() -> String {
        (0..150).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn sticky_summary_via_mock() {
        let kp = summarize_result(&MockProvider::new(3), &[story()], NodeKind::StickyNote, &CompletionParams::default());
        assert_eq!(word_count(&kp.key_point), 5);
        assert_eq!(kp.key_point, "w0 w1 w2 w3 w4");
        assert!(word_count(&kp.summary) <= SUMMARY_MAX_WORDS);
    }

    #[test]
    fn sticky_summary_falls_back_on_failure() {
        let kp = summarize_result(&Down, &[story()], NodeKind::StickyNote, &CompletionParams::default());
        assert_eq!(kp.key_point, "w0 w1 w2 w3 w4");
        assert_eq!(word_count(&kp.summary), 25);
    }

    #[test]
    fn key_point_parser_enforces_limits() {
        assert!(parse_key_points("Key point: a b\nSummary: c d").is_some());
        assert!(parse_key_points("Key point: a b c d e f\nSummary: c").is_none());
        assert!(parse_key_points("Summary: only").is_none());
    }
}
