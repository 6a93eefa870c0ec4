//! Identifier newtypes. All ids share one document-wide counter and serialize as
//! prefixed strings (`n12`, `e3`, `s4`, `t1`, `r7`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed id {0:?}")]
pub struct IdParseError(pub String);

macro_rules! prefixed_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u64);

        impl $name {
            pub const PREFIX: char = $prefix;
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", $prefix, self.0)
            }
        }

        impl FromStr for $name {
            type Err = IdParseError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.strip_prefix($prefix)
                    .and_then(|n| n.parse::<u64>().ok())
                    .map($name)
                    .ok_or_else(|| IdParseError(s.to_string()))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

prefixed_id!(NodeId, 'n');
prefixed_id!(EdgeId, 'e');
prefixed_id!(SectionId, 's');
prefixed_id!(TaskId, 't');
prefixed_id!(
    /// Identifies one outstanding LLM request.
    RequestId,
    'r'
);

/// Element a task header is attached to: a primitive node or a section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Anchor {
    Node(NodeId),
    Section(SectionId),
}

impl Anchor {
    pub fn raw(self) -> u64 {
        match self {
            Anchor::Node(n) => n.0,
            Anchor::Section(s) => s.0,
        }
    }

    pub fn as_node(self) -> Option<NodeId> {
        match self {
            Anchor::Node(n) => Some(n),
            Anchor::Section(_) => None,
        }
    }
}

impl From<NodeId> for Anchor {
    fn from(n: NodeId) -> Self {
        Anchor::Node(n)
    }
}

impl From<SectionId> for Anchor {
    fn from(s: SectionId) -> Self {
        Anchor::Section(s)
    }
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anchor::Node(n) => n.fmt(f),
            Anchor::Section(s) => s.fmt(f),
        }
    }
}

impl FromStr for Anchor {
    type Err = IdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.chars().next() {
            Some(NodeId::PREFIX) => s.parse().map(Anchor::Node),
            Some(SectionId::PREFIX) => s.parse().map(Anchor::Section),
            _ => Err(IdParseError(s.to_string())),
        }
    }
}

impl Serialize for Anchor {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Anchor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
