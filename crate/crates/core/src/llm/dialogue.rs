use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DialogueError {
    #[error("a system turn may only open the dialogue")]
    MisplacedSystem,
    #[error("expected a {expected:?} turn, got {got:?}")]
    OutOfTurn { expected: Role, got: Role },
}

/// Append-only chat transcript. After an optional leading system turn, roles
/// alternate user/assistant starting with user.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dialogue {
    turns: Vec<Turn>,
}

impl Dialogue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_user(text: impl Into<String>) -> Self {
        let mut d = Self::new();
        d.turns.push(Turn { role: Role::User, text: text.into() });
        d
    }

    /// Rebuilds a dialogue from raw turns, checking the alternation rule.
    pub fn from_turns(turns: impl IntoIterator<Item = Turn>) -> Result<Self, DialogueError> {
        let mut d = Self::new();
        for t in turns {
            d.push(t.role, t.text)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, role: Role, text: impl Into<String>) -> Result<(), DialogueError> {
        let expected = self.next_role();
        match role {
            Role::System if !self.turns.is_empty() => return Err(DialogueError::MisplacedSystem),
            Role::System => {}
            r if r != expected => return Err(DialogueError::OutOfTurn { expected, got: r }),
            _ => {}
        }
        self.turns.push(Turn { role, text: text.into() });
        Ok(())
    }

    pub fn push_user(&mut self, text: impl Into<String>) -> Result<(), DialogueError> {
        self.push(Role::User, text)
    }

    pub fn push_assistant(&mut self, text: impl Into<String>) -> Result<(), DialogueError> {
        self.push(Role::Assistant, text)
    }

    fn next_role(&self) -> Role {
        match self.turns.last().map(|t| t.role) {
            None | Some(Role::System) | Some(Role::Assistant) => Role::User,
            Some(Role::User) => Role::Assistant,
        }
    }

    /// Whether the dialogue is waiting for an assistant reply.
    pub fn awaits_reply(&self) -> bool {
        matches!(self.turns.last(), Some(Turn { role: Role::User, .. }))
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn last_user(&self) -> Option<&str> {
        self.turns.iter().rev().find(|t| t.role == Role::User).map(|t| t.text.as_str())
    }

    pub fn first_user(&self) -> Option<&str> {
        self.turns.iter().find(|t| t.role == Role::User).map(|t| t.text.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternation_is_enforced() {
        let mut d = Dialogue::new();
        d.push(Role::System, "be terse").unwrap();
        assert_eq!(d.push_assistant("hi"), Err(DialogueError::OutOfTurn { expected: Role::User, got: Role::Assistant }));
        d.push_user("q").unwrap();
        assert!(d.awaits_reply());
        assert!(d.push_user("again").is_err());
        d.push_assistant("a").unwrap();
        assert_eq!(d.push(Role::System, "late"), Err(DialogueError::MisplacedSystem));
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn from_turns_rejects_bad_order() {
        let turns = vec![
            Turn { role: Role::Assistant, text: "x".into() },
        ];
        assert!(Dialogue::from_turns(turns).is_err());
    }
}
