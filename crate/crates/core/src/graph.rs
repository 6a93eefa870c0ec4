//! Diagram data model: primitive nodes, edges, sections, and the graph
//! queries the scheduler needs (section membership, outlines, neighbours).

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::document::CanvasDocument;
use crate::event::EventKind;
use crate::ids::{EdgeId, NodeId, SectionId, TaskId};
use crate::llm::Dialogue;
use crate::{Millis, Point, Rect, Size};

/// How many nearest neighbours `nearby_node` draws from.
pub const NEARBY_K: usize = 3;

/// Indentation unit of one outline level.
pub const OUTLINE_INDENT: &str = "-   ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Keyword,
    Concept,
    StickyNote,
}

impl NodeKind {
    pub const ALL: [NodeKind; 3] = [NodeKind::Keyword, NodeKind::Concept, NodeKind::StickyNote];

    /// Footprint of a freshly generated node of this kind.
    pub fn default_size(self) -> Size {
        match self {
            NodeKind::Keyword => Size::new(80.0, 24.0),
            NodeKind::Concept => Size::new(140.0, 60.0),
            NodeKind::StickyNote => Size::new(200.0, 160.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Origin {
    User,
    Generated {
        task_id: TaskId,
        /// Node or section whose task header produced this candidate.
        source: crate::ids::Anchor,
        accepted: bool,
        dialogue: Dialogue,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub text: String,
    /// Top-left corner.
    pub position: Point,
    pub size: Size,
    pub origin: Origin,
}

impl DiagramNode {
    pub fn rect(&self) -> Rect {
        Rect::new(self.position, self.size)
    }

    pub fn center(&self) -> Point {
        self.rect().center()
    }

    /// Generated and not yet accepted; such nodes render hollow and are
    /// invisible to sampling, outlines and neighbour queries.
    pub fn is_pending(&self) -> bool {
        matches!(self.origin, Origin::Generated { accepted: false, .. })
    }

    pub fn is_settled(&self) -> bool {
        !self.is_pending()
    }

    pub fn generated_by(&self) -> Option<TaskId> {
        match &self.origin {
            Origin::Generated { task_id, .. } => Some(*task_id),
            Origin::User => None,
        }
    }

    pub fn dialogue(&self) -> Option<&Dialogue> {
        match &self.origin {
            Origin::Generated { dialogue, .. } => Some(dialogue),
            Origin::User => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    pub directed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub id: SectionId,
    pub title: String,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("unknown section {0}")]
    UnknownSection(SectionId),
    #[error("size must be positive, got {width}x{height}")]
    NonPositiveSize { width: f64, height: f64 },
    #[error("edge from {0} to itself")]
    SelfLoop(NodeId),
    #[error("edge {from}->{to} (directed={directed}) already exists")]
    DuplicateEdge { from: NodeId, to: NodeId, directed: bool },
}

fn reading_order(a: Point, b: Point) -> std::cmp::Ordering {
    a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x))
}

fn check_size(size: Size) -> Result<(), GraphError> {
    if size.is_positive() {
        Ok(())
    } else {
        Err(GraphError::NonPositiveSize { width: size.width, height: size.height })
    }
}

impl CanvasDocument {
    pub fn add_node(
        &mut self,
        now: Millis,
        kind: NodeKind,
        text: impl Into<String>,
        position: Point,
        size: Size,
    ) -> Result<NodeId, GraphError> {
        check_size(size)?;
        let id = NodeId(self.peek_id());
        let node = DiagramNode { id, kind, text: text.into(), position, size, origin: Origin::User };
        self.commit(now, EventKind::NodeAdded { node });
        Ok(id)
    }

    /// Replaces the node text. The emitted `TextConfirmed` event is a
    /// confirmation, so it fires even when the text is unchanged.
    pub fn update_text(&mut self, now: Millis, id: NodeId, text: impl Into<String>) -> Result<NodeKind, GraphError> {
        let kind = self.node(id).ok_or(GraphError::UnknownNode(id))?.kind;
        self.commit(now, EventKind::TextConfirmed { node_id: id, kind, text: text.into() });
        Ok(kind)
    }

    pub fn move_node(&mut self, now: Millis, id: NodeId, position: Point) -> Result<(), GraphError> {
        self.node(id).ok_or(GraphError::UnknownNode(id))?;
        self.commit(now, EventKind::NodeMoved { node_id: id, position });
        Ok(())
    }

    pub fn resize_node(&mut self, now: Millis, id: NodeId, size: Size) -> Result<(), GraphError> {
        check_size(size)?;
        self.node(id).ok_or(GraphError::UnknownNode(id))?;
        self.commit(now, EventKind::NodeResized { node_id: id, size });
        Ok(())
    }

    /// Removes the node together with its edges, its task states, and any
    /// pending candidates shown on its header.
    pub fn delete_node(&mut self, now: Millis, id: NodeId) -> Result<(), GraphError> {
        self.node(id).ok_or(GraphError::UnknownNode(id))?;
        self.commit(now, EventKind::NodeDeleted { node_id: id });
        Ok(())
    }

    pub fn connect(&mut self, now: Millis, from: NodeId, to: NodeId, directed: bool) -> Result<EdgeId, GraphError> {
        if from == to {
            return Err(GraphError::SelfLoop(from));
        }
        for n in [from, to] {
            self.node(n).ok_or(GraphError::UnknownNode(n))?;
        }
        if self.edges().any(|e| e.from == from && e.to == to && e.directed == directed) {
            return Err(GraphError::DuplicateEdge { from, to, directed });
        }
        let id = EdgeId(self.peek_id());
        self.commit(now, EventKind::EdgeAdded { edge: Edge { id, from, to, directed } });
        Ok(id)
    }

    pub fn disconnect(&mut self, now: Millis, id: EdgeId) -> Result<(), GraphError> {
        self.edge(id).ok_or(GraphError::UnknownEdge(id))?;
        self.commit(now, EventKind::EdgeRemoved { edge_id: id });
        Ok(())
    }

    pub fn add_section(&mut self, now: Millis, title: impl Into<String>, rect: Rect) -> Result<SectionId, GraphError> {
        check_size(rect.size())?;
        let id = SectionId(self.peek_id());
        self.commit(now, EventKind::SectionAdded { section: Section { id, title: title.into(), rect } });
        Ok(id)
    }

    pub fn delete_section(&mut self, now: Millis, id: SectionId) -> Result<(), GraphError> {
        self.section(id).ok_or(GraphError::UnknownSection(id))?;
        self.commit(now, EventKind::SectionDeleted { section_id: id });
        Ok(())
    }

    pub fn move_cursor(&mut self, now: Millis, position: Point) {
        self.commit(now, EventKind::CursorMoved { position });
    }

    /// Settled nodes whose center lies strictly inside the section, in reading order.
    pub fn section_members(&self, id: SectionId) -> Result<Vec<NodeId>, GraphError> {
        let section = self.section(id).ok_or(GraphError::UnknownSection(id))?;
        let mut members: Vec<&DiagramNode> = self
            .nodes()
            .filter(|n| n.is_settled() && section.rect.contains_strict(n.center()))
            .collect();
        members.sort_by(|a, b| reading_order(a.position, b.position).then(a.id.cmp(&b.id)));
        Ok(members.into_iter().map(|n| n.id).collect())
    }

    /// Depth-first outline of the section's directed hierarchy. Each depth
    /// level adds one `"-   "` prefix; nodes are printed once even when
    /// reachable through several parents or a cycle.
    pub fn section_outline(&self, id: SectionId) -> Result<String, GraphError> {
        let members = self.section_members(id)?;
        let rank: BTreeMap<NodeId, usize> = members.iter().enumerate().map(|(i, n)| (*n, i)).collect();

        let mut children: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        let mut has_parent = BTreeSet::new();
        for e in self.edges().filter(|e| e.directed) {
            if rank.contains_key(&e.from) && rank.contains_key(&e.to) {
                children.entry(e.from).or_default().push(e.to);
                has_parent.insert(e.to);
            }
        }
        for kids in children.values_mut() {
            kids.sort_by_key(|k| rank[k]);
            kids.dedup();
        }

        let mut visited = BTreeSet::new();
        let mut lines = Vec::with_capacity(members.len());
        // Roots first; then anything left unvisited (pure cycles).
        let starts = members
            .iter()
            .filter(|n| !has_parent.contains(*n))
            .chain(members.iter());
        for &start in starts {
            if visited.contains(&start) {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            while let Some((node, depth)) = stack.pop() {
                if !visited.insert(node) {
                    continue;
                }
                let text = &self.node(node).expect("member exists").text;
                lines.push(format!("{}{}", OUTLINE_INDENT.repeat(depth), text));
                if let Some(kids) = children.get(&node) {
                    for &k in kids.iter().rev() {
                        if !visited.contains(&k) {
                            stack.push((k, depth + 1));
                        }
                    }
                }
            }
        }
        Ok(lines.join("\n"))
    }

    /// The up-to-`NEARBY_K` settled nodes closest to `id`, nearest first.
    pub fn nearest_nodes(&self, id: NodeId) -> Result<Vec<NodeId>, GraphError> {
        let center = self.node(id).ok_or(GraphError::UnknownNode(id))?.center();
        let mut others: Vec<(f64, NodeId)> = self
            .nodes()
            .filter(|n| n.id != id && n.is_settled())
            .map(|n| (n.center().distance(center), n.id))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(others.into_iter().take(NEARBY_K).map(|(_, n)| n).collect())
    }

    /// Uniform draw among the nearest neighbours of `id`.
    pub fn nearby_node<R: Rng + ?Sized>(&self, id: NodeId, rng: &mut R) -> Result<Option<NodeId>, GraphError> {
        let near = self.nearest_nodes(id)?;
        if near.is_empty() {
            return Ok(None);
        }
        Ok(Some(near[rng.random_range(0..near.len())]))
    }
}
