//! Microtask specifications: the six built-in tasks, validation, prompt
//! rendering, initiative/visibility settings, and LLM-assisted delegation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::document::CanvasDocument;
use crate::event::EventKind;
use crate::graph::NodeKind;
use crate::ids::{Anchor, TaskId};
use crate::llm::{self, CompletionParams, Dialogue, LlmError, Provider};
use crate::Millis;

pub const PLACEHOLDER: &str = "[placeholder]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputType {
    Keyword,
    Concept,
    StickyNote,
    Section,
    /// A sampled primitive node plus one of its neighbours.
    Nodes,
}

impl InputType {
    /// Sampling order within one scheduler tick.
    pub const ALL: [InputType; 5] =
        [InputType::Keyword, InputType::Concept, InputType::StickyNote, InputType::Section, InputType::Nodes];

    pub fn of_kind(kind: NodeKind) -> Self {
        match kind {
            NodeKind::Keyword => InputType::Keyword,
            NodeKind::Concept => InputType::Concept,
            NodeKind::StickyNote => InputType::StickyNote,
        }
    }

    pub fn placeholder_count(self) -> usize {
        match self {
            InputType::Nodes => 2,
            _ => 1,
        }
    }

    /// Whether an element of this anchor shape and node kind can feed this input.
    pub fn accepts(self, anchor: Anchor, kind: Option<NodeKind>) -> bool {
        match (self, anchor) {
            (InputType::Section, Anchor::Section(_)) => true,
            (InputType::Nodes, Anchor::Node(_)) => true,
            (t, Anchor::Node(_)) => kind.is_some_and(|k| InputType::of_kind(k) == t),
            _ => false,
        }
    }
}

/// Result diagram type of a task.
pub type OutputType = NodeKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initiative {
    Proactive,
    Reactive,
}

impl Initiative {
    pub fn toggled(self) -> Self {
        match self {
            Initiative::Proactive => Initiative::Reactive,
            Initiative::Reactive => Initiative::Proactive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb(pub [u8; 3]);

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b] = self.0;
        write!(f, "#{r:02x}{g:02x}{b:02x}")
    }
}

impl FromStr for Rgb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix('#').filter(|h| h.len() == 6).ok_or_else(|| format!("bad color {s:?}"))?;
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|e| e.to_string());
        Ok(Rgb([byte(0)?, byte(2)?, byte(4)?]))
    }
}

impl Serialize for Rgb {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Twelve task colours; new tasks take the first one not in use.
pub const PALETTE: [Rgb; 12] = [
    Rgb([0xe0, 0x6c, 0x2f]),
    Rgb([0x3a, 0x86, 0xc8]),
    Rgb([0x4c, 0xa8, 0x5a]),
    Rgb([0x8e, 0x5c, 0xc4]),
    Rgb([0xd1, 0x4f, 0x7a]),
    Rgb([0x2b, 0xa6, 0xa0]),
    Rgb([0xc9, 0xa2, 0x27]),
    Rgb([0x6d, 0x7b, 0x8a]),
    Rgb([0xa8, 0x4a, 0x32]),
    Rgb([0x5b, 0x6e, 0xe1]),
    Rgb([0x7f, 0xa0, 0x3c]),
    Rgb([0xb5, 0x5f, 0xb0]),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub label: String,
    pub template: String,
}

impl PromptTemplate {
    pub fn new(label: &str, template: &str) -> Self {
        Self { label: label.to_string(), template: template.to_string() }
    }

    pub fn placeholder_count(&self) -> usize {
        self.template.matches(PLACEHOLDER).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    /// Assigned by the document when the task is confirmed.
    pub id: TaskId,
    pub name: String,
    pub color: Rgb,
    pub input_type: InputType,
    pub output_type: OutputType,
    pub prompts: Vec<PromptTemplate>,
    pub active_prompt: usize,
    pub initiative: Initiative,
    pub visible: bool,
}

impl TaskSpec {
    pub fn active_template(&self) -> Option<&PromptTemplate> {
        self.prompts.get(self.active_prompt)
    }
}

/// Output constraints requested from the model and enforced on its replies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationConstraints {
    pub count: usize,
    pub max_words: usize,
}

impl GenerationConstraints {
    pub fn for_output(kind: OutputType) -> Self {
        match kind {
            NodeKind::Keyword => Self { count: 3, max_words: 3 },
            NodeKind::Concept => Self { count: 3, max_words: 5 },
            NodeKind::StickyNote => Self { count: 1, max_words: 150 },
        }
    }

    /// Instruction appended to every rendered prompt.
    pub fn suffix(kind: OutputType) -> &'static str {
        match kind {
            NodeKind::Keyword => "\nReturn exactly 3 results, each no more than 3 words, as a numbered list.",
            NodeKind::Concept => "\nReturn exactly 3 results, each no more than 5 words, as a numbered list.",
            NodeKind::StickyNote => "\nReturn 1 result of no more than 150 words.",
        }
    }

    pub fn admits(&self, items: &[String]) -> bool {
        items.len() == self.count && items.iter().all(|i| word_count(i) <= self.max_words && !i.trim().is_empty())
    }
}

pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// The six built-in microtasks, all proactive and visible, first prompt active.
pub fn defaults() -> Vec<TaskSpec> {
    let spec = |n: u64, name: &str, input, output, prompts: Vec<PromptTemplate>| TaskSpec {
        id: TaskId(n),
        name: name.to_string(),
        color: PALETTE[n as usize - 1],
        input_type: input,
        output_type: output,
        prompts,
        active_prompt: 0,
        initiative: Initiative::Proactive,
        visible: true,
    };
    vec![
        spec(
            1,
            "Brainstorm",
            InputType::Keyword,
            NodeKind::Keyword,
            vec![
                PromptTemplate::new("Find Related", "Brainstorm keywords related to [placeholder]."),
                PromptTemplate::new("Find Synonym", "Find synonyms for [placeholder]."),
            ],
        ),
        spec(
            2,
            "Summarise",
            InputType::StickyNote,
            NodeKind::StickyNote,
            vec![
                PromptTemplate::new("TLDR", "Provide a TLDR version of the following:\n[placeholder]"),
                PromptTemplate::new("Top 3 keywords", "Summarise top 3 keywords of the following:\n[placeholder]"),
            ],
        ),
        spec(
            3,
            "Elaborate",
            InputType::Concept,
            NodeKind::Concept,
            vec![
                PromptTemplate::new("Provide Examples", "What are examples of [placeholder]."),
                PromptTemplate::new("Clarification", "Provide a simple explanation of [placeholder]."),
            ],
        ),
        spec(
            4,
            "Draft",
            InputType::Section,
            NodeKind::StickyNote,
            vec![
                PromptTemplate::new("Abstract", "[placeholder]\n\nWrite an abstract of the above outline."),
                PromptTemplate::new("Overview", "[placeholder].\n\nWrite an overview of the above outline."),
            ],
        ),
        spec(
            5,
            "Freewrite",
            InputType::StickyNote,
            NodeKind::StickyNote,
            vec![PromptTemplate::new("Co-creation", "[placeholder].\n Continue to write.")],
        ),
        spec(
            6,
            "Associate",
            InputType::Nodes,
            NodeKind::Keyword,
            vec![PromptTemplate::new(
                "Find Relationship",
                "Clarify the relationship between [placeholder] and [placeholder] in simple words.",
            )],
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    #[error("task name is empty")]
    EmptyName,
    #[error("task has no prompts")]
    NoPrompts,
    #[error("active prompt {index} out of range")]
    ActivePromptOutOfRange { index: usize },
    #[error("prompt {index} has {found} placeholders, expected {expected}")]
    PlaceholderArity { index: usize, expected: usize, found: usize },
    #[error("color {color} already used by task {other}")]
    DuplicateColor { color: String, other: TaskId },
}

/// Checks a spec on its own and against the other tasks of a document.
/// Tasks sharing `spec.id` are ignored so an edited spec can be re-validated.
pub fn validate(spec: &TaskSpec, existing: &[TaskSpec]) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if spec.name.trim().is_empty() {
        out.push(Violation::EmptyName);
    }
    if spec.prompts.is_empty() {
        out.push(Violation::NoPrompts);
    } else if spec.active_prompt >= spec.prompts.len() {
        out.push(Violation::ActivePromptOutOfRange { index: spec.active_prompt });
    }
    let expected = spec.input_type.placeholder_count();
    for (index, p) in spec.prompts.iter().enumerate() {
        let found = p.placeholder_count();
        if found != expected {
            out.push(Violation::PlaceholderArity { index, expected, found });
        }
    }
    if let Some(other) = existing.iter().find(|t| t.id != spec.id && t.color == spec.color) {
        out.push(Violation::DuplicateColor { color: spec.color.to_string(), other: other.id });
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("prompt expects {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("task has no active prompt")]
    NoActivePrompt,
}

/// Fills the active template left to right and appends the output constraint.
pub fn render_prompt(spec: &TaskSpec, texts: &[&str]) -> Result<String, RenderError> {
    let template = spec.active_template().ok_or(RenderError::NoActivePrompt)?;
    let expected = template.placeholder_count();
    if texts.len() != expected || expected == 0 {
        return Err(RenderError::Arity { expected, got: texts.len() });
    }
    let mut out = String::with_capacity(template.template.len() + 64);
    let mut pieces = template.template.split(PLACEHOLDER);
    out.push_str(pieces.next().unwrap_or_default());
    for (piece, text) in pieces.zip(texts) {
        // Input text must not smuggle in a marker of its own.
        out.push_str(&text.replace(PLACEHOLDER, "placeholder"));
        out.push_str(piece);
    }
    out.push_str(GenerationConstraints::suffix(spec.output_type));
    Ok(out)
}

/// Where an initiative change applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scope", content = "anchor", rename_all = "snake_case")]
pub enum Scope {
    Global,
    Local(Anchor),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskError {
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("unknown element {0}")]
    UnknownAnchor(Anchor),
    #[error("invalid task: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("prompt index {0} out of range")]
    PromptOutOfRange(usize),
    #[error("no free task color")]
    PaletteExhausted,
}

impl CanvasDocument {
    pub fn first_free_color(&self) -> Option<Rgb> {
        PALETTE.iter().copied().find(|c| self.tasks().iter().all(|t| t.color != *c))
    }

    /// Validates and stores a task, assigning it a fresh id.
    pub fn confirm_task(&mut self, now: Millis, mut spec: TaskSpec) -> Result<TaskId, TaskError> {
        spec.id = TaskId(self.peek_id());
        validate(&spec, self.tasks()).map_err(TaskError::Invalid)?;
        let id = spec.id;
        self.commit(now, EventKind::TaskAdded { task: spec });
        Ok(id)
    }

    /// Replaces the stored spec with the same id (task card edits).
    pub fn update_task(&mut self, now: Millis, spec: TaskSpec) -> Result<(), TaskError> {
        self.task(spec.id).ok_or(TaskError::UnknownTask(spec.id))?;
        validate(&spec, self.tasks()).map_err(TaskError::Invalid)?;
        self.commit(now, EventKind::TaskUpdated { task: spec });
        Ok(())
    }

    pub fn select_prompt(&mut self, now: Millis, task_id: TaskId, index: usize) -> Result<(), TaskError> {
        let task = self.task(task_id).ok_or(TaskError::UnknownTask(task_id))?;
        if index >= task.prompts.len() {
            return Err(TaskError::PromptOutOfRange(index));
        }
        self.commit(now, EventKind::PromptSelected { task_id, index });
        Ok(())
    }

    /// Deletes a task. Its pending candidates leave the canvas; accepted
    /// nodes stay, they belong to the document.
    pub fn delete_task(&mut self, now: Millis, task_id: TaskId) -> Result<(), TaskError> {
        self.task(task_id).ok_or(TaskError::UnknownTask(task_id))?;
        self.commit(now, EventKind::TaskDeleted { task_id });
        Ok(())
    }

    pub fn set_initiative(&mut self, now: Millis, task_id: TaskId, mode: Initiative, scope: Scope) -> Result<(), TaskError> {
        self.task(task_id).ok_or(TaskError::UnknownTask(task_id))?;
        if let Scope::Local(anchor) = scope {
            if !self.has_anchor(anchor) {
                return Err(TaskError::UnknownAnchor(anchor));
            }
        }
        self.commit(now, EventKind::InitiativeSet { task_id, scope, mode });
        Ok(())
    }

    /// Local override if present, otherwise the task's global mode.
    pub fn effective_initiative(&self, anchor: Anchor, task_id: TaskId) -> Option<Initiative> {
        let task = self.task(task_id)?;
        Some(self.state(anchor, task_id).and_then(|s| s.local_initiative).unwrap_or(task.initiative))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DelegateError {
    #[error("language model failed: {0}")]
    Llm(#[from] LlmError),
    #[error("language model returned an empty {0}")]
    Empty(&'static str),
    #[error("no free task color")]
    PaletteExhausted,
}

/// Few-shot request for a new task name, using the built-in names as examples.
pub fn name_request() -> String {
    let mut s = String::from(
        "Suggest a short name for a new microtask that helps a writer during prewriting.\nExisting microtasks:\n",
    );
    for t in defaults() {
        s.push_str(&t.name);
        s.push('\n');
    }
    s.push_str("Reply with one new name only.");
    s
}

/// Few-shot request for an example prompt, using built-in name/prompt pairs.
pub fn prompt_request(name: &str) -> String {
    let mut s = String::from(
        "Write an example prompt template for a prewriting microtask. Mark where the input text goes with [placeholder].\n",
    );
    for t in defaults() {
        s.push_str(&format!("{}: {}\n", t.name, t.prompts[0].template.replace('\n', "\\n")));
    }
    s.push_str(&format!("{name}:"));
    s
}

fn first_line(reply: &str) -> String {
    reply
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or_default()
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c == '`')
        .trim()
        .to_string()
}

/// Runs the delegation dialogue and returns an unconfirmed keyword-to-keyword
/// task. Nothing is stored; pass the result to [`CanvasDocument::confirm_task`].
pub fn delegate_task(
    doc: &CanvasDocument,
    name_hint: Option<&str>,
    provider: &dyn Provider,
    params: &CompletionParams,
) -> Result<TaskSpec, DelegateError> {
    let color = doc.first_free_color().ok_or(DelegateError::PaletteExhausted)?;
    let name = match name_hint.map(str::trim).filter(|n| !n.is_empty()) {
        Some(n) => n.to_string(),
        None => {
            let reply = llm::complete(provider, &Dialogue::with_user(name_request()), params)?;
            let name = first_line(&reply);
            if name.is_empty() {
                return Err(DelegateError::Empty("task name"));
            }
            name
        }
    };
    let reply = llm::complete(provider, &Dialogue::with_user(prompt_request(&name)), params)?;
    let mut template = reply.trim().replace("\\n", "\n");
    if template.is_empty() {
        return Err(DelegateError::Empty("prompt"));
    }
    let found = template.matches(PLACEHOLDER).count();
    if found == 0 {
        template.push('\n');
        template.push_str(PLACEHOLDER);
    } else if found > 1 {
        // Keep the first marker; a keyword task takes exactly one input.
        let first = template.find(PLACEHOLDER).unwrap() + PLACEHOLDER.len();
        let tail = template[first..].replace(PLACEHOLDER, "the input");
        template.truncate(first);
        template.push_str(&tail);
    }
    Ok(TaskSpec {
        id: TaskId(doc.peek_id()),
        name,
        color,
        input_type: InputType::Keyword,
        output_type: NodeKind::Keyword,
        prompts: vec![PromptTemplate { label: "Suggested".into(), template }],
        active_prompt: 0,
        initiative: Initiative::Proactive,
        visible: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_stable() {
        let d = defaults();
        assert_eq!(d.len(), 6);
        assert_eq!(d, defaults());
        for t in &d {
            assert_eq!(validate(t, &d), Ok(()), "{}", t.name);
        }
    }

    #[test]
    fn arity_and_name_violations() {
        let mut assoc = defaults().pop().unwrap();
        assoc.prompts[0].template = "Relate [placeholder] to itself.".into();
        assert!(matches!(
            validate(&assoc, &[]).unwrap_err()[..],
            [Violation::PlaceholderArity { expected: 2, found: 1, .. }]
        ));
        let mut b = defaults().remove(0);
        b.name = "  ".into();
        assert_eq!(validate(&b, &[]), Err(vec![Violation::EmptyName]));
    }

    #[test]
    fn duplicate_color_detected() {
        let d = defaults();
        let mut clash = d[0].clone();
        clash.id = TaskId(99);
        assert!(matches!(validate(&clash, &d).unwrap_err()[..], [Violation::DuplicateColor { .. }]));
    }

    #[test]
    fn render_substitutes_and_appends_suffix() {
        let d = defaults();
        assert_eq!(
            render_prompt(&d[0], &["endless roads"]).unwrap(),
            "Brainstorm keywords related to endless roads.\nReturn exactly 3 results, each no more than 3 words, as a numbered list."
        );
        let assoc = render_prompt(&d[5], &["parallel collaboration", "creative writing"]).unwrap();
        assert!(assoc.starts_with(
            "Clarify the relationship between parallel collaboration and creative writing in simple words."
        ));
        assert_eq!(render_prompt(&d[0], &[]), Err(RenderError::Arity { expected: 1, got: 0 }));
        let sticky = render_prompt(&d[1], &["story"]).unwrap();
        assert!(sticky.ends_with("\nReturn 1 result of no more than 150 words."));
        let sneaky = render_prompt(&d[0], &["a [placeholder] b"]).unwrap();
        assert!(!sneaky.contains(PLACEHOLDER));
    }

    #[test]
    fn rgb_round_trip() {
        let c: Rgb = "#3a86c8".parse().unwrap();
        assert_eq!(c, PALETTE[1]);
        assert_eq!(c.to_string(), "#3a86c8");
        assert!("3a86c8".parse::<Rgb>().is_err());
    }

    #[test]
    fn palette_is_distinct() {
        for (i, a) in PALETTE.iter().enumerate() {
            assert!(PALETTE[i + 1..].iter().all(|b| b != a));
        }
    }
}
