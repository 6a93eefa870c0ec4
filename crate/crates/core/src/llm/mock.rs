use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CompletionParams, Dialogue, LlmError, Provider};

const VOCAB: &[&str] = &[
    "horizon", "journey", "memory", "lantern", "harbor", "echo", "threshold", "garden", "signal", "tide", "compass",
    "ember", "archive", "bridge", "canvas", "meadow", "orbit", "riddle", "summit", "thread", "voyage", "whisper",
    "anchor", "beacon", "cascade", "dialogue", "frontier", "gravity", "habit", "insight", "kinship", "mosaic",
    "narrative", "pattern", "quiet", "rhythm", "shelter", "tension", "unity", "vision", "wander", "balance",
    "contrast", "draft", "focus", "growth", "story", "motive", "ritual", "texture", "season", "spark", "root",
    "window", "current", "silence", "weather", "map", "key", "path",
];

/// Fault injection knobs. Faults are decided per dialogue, so they are as
/// deterministic as the replies.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MockFaults {
    /// Probability that a call fails with a transport error.
    pub error_rate: f64,
    /// Probability that a generation reply breaks its output constraint.
    pub malformed_rate: f64,
}

/// Offline provider whose reply is a pure function of the dialogue and seed.
/// It understands the request shapes this crate sends (generation, summary,
/// feedback, explanation, task naming) and answers each in the requested form.
#[derive(Debug, Clone)]
pub struct MockProvider {
    seed: u64,
    faults: MockFaults,
}

fn fnv1a(seed: u64, dialogue: &Dialogue) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for t in dialogue.turns() {
        eat(format!("{:?}", t.role).as_bytes());
        eat(&[0]);
        eat(t.text.as_bytes());
        eat(&[0xff]);
    }
    h
}

fn number_after(text: &str, marker: &str) -> Option<usize> {
    let rest = &text[text.find(marker)? + marker.len()..];
    let digits: String = rest.trim_start().chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

fn quoted(text: &str) -> &str {
    text.split_once('"').and_then(|(_, r)| r.split_once("\":")).map_or("", |(q, _)| q)
}

fn phrase(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        Self { seed, faults: MockFaults::default() }
    }

    pub fn with_faults(seed: u64, faults: MockFaults) -> Self {
        Self { seed, faults }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn reply(&self, dialogue: &Dialogue, rng: &mut ChaCha8Rng) -> String {
        let last = dialogue.last_user().unwrap_or_default();
        let first = dialogue.first_user().unwrap_or_default();
        let malformed = rng.random_bool(self.faults.malformed_rate.clamp(0.0, 1.0));

        if last.ends_with("Explain briefly why you generated this result.") {
            let q = quoted(last);
            return format!("\"{q}\" connects to your input through the idea of {}.", phrase(rng, 1));
        }
        if last.ends_with("Regenerate one result under the same constraints.") {
            let max = number_after(first, "no more than").unwrap_or(3).max(1);
            let q: Vec<&str> = quoted(last).split_whitespace().collect();
            let words: Vec<String> = if last.contains("Be brief.") {
                q.iter().take(q.len().div_ceil(2).max(1)).map(|w| w.to_string()).collect()
            } else if last.contains("Be more specific.") {
                let mut w: Vec<String> = q.iter().map(|w| w.to_string()).collect();
                w.push(phrase(rng, 1));
                w.into_iter().rev().take(max).collect::<Vec<_>>().into_iter().rev().collect()
            } else {
                { let n = rng.random_range(1..=max.min(2)); vec![phrase(rng, n)] }
            };
            let text = words.join(" ");
            return if text.is_empty() { phrase(rng, 1) } else { text };
        }
        if last.contains("Answer in two lines starting with \"Key point:\"") {
            let body = last.split_once("\n\n").map_or("", |(_, b)| b);
            let take = |n| body.split_whitespace().take(n).collect::<Vec<_>>().join(" ");
            return format!("Key point: {}\nSummary: {}", take(5), take(25));
        }
        if last.starts_with("Suggest a short name") {
            return capitalize(VOCAB[rng.random_range(0..VOCAB.len())]);
        }
        if last.starts_with("Write an example prompt template") {
            let name = last.lines().last().unwrap_or_default().trim_end_matches(':').trim();
            return format!("{name} the following idea: [placeholder].");
        }
        if let Some(max) = number_after(last, "Return exactly 3 results, each no more than") {
            let mut items: Vec<String> = (0..3).map(|_| { let n = rng.random_range(1..=max.max(1)); phrase(rng, n) }).collect();
            if malformed {
                if rng.random_bool(0.5) {
                    items.push(phrase(rng, 1));
                } else {
                    items[0] = phrase(rng, max + 2);
                }
            }
            return super::format_generations(&items);
        }
        if last.contains("Return 1 result of no more than 150 words.") {
            let n = if malformed { rng.random_range(151..=170) } else { rng.random_range(20..=80) };
            return format!("{}.", capitalize(&phrase(rng, n)));
        }
        format!("Noted: {}.", phrase(rng, 2))
    }
}

impl Provider for MockProvider {
    fn complete(&self, dialogue: &Dialogue, _params: &CompletionParams) -> Result<String, LlmError> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(self.seed, dialogue));
        if rng.random_bool(self.faults.error_rate.clamp(0.0, 1.0)) {
            return Err(LlmError::Transport("mock outage".into()));
        }
        Ok(self.reply(dialogue, &mut rng))
    }
}
