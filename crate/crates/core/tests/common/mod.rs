#![allow(dead_code)]

use std::collections::BTreeMap;

use prewrite_core::llm::{Feedback, MockFaults};
use prewrite_core::sim::{Action, SimConfig, Simulator};
use prewrite_core::tasks::{Initiative, Scope};
use prewrite_core::{Anchor, CanvasDocument, Event, EventKind, NodeId, NodeKind, PhaseName, TaskId};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WORDS: &[&str] = &[
    "travel", "endless roads", "memory", "harbor", "night train", "letters", "grief", "summer", "maps", "strangers",
];

pub fn add(doc: &mut CanvasDocument, kind: NodeKind, text: &str, x: f64, y: f64) -> NodeId {
    doc.add_node(0, kind, text, prewrite_core::Point::new(x, y), kind.default_size()).unwrap()
}

/// Drives a simulator with random user actions and clock advances.
pub struct Fuzzer {
    pub sim: Simulator,
    rng: ChaCha8Rng,
    pub rejected: usize,
}

pub fn fuzz_config(faults: bool) -> SimConfig {
    let mut cfg = SimConfig::default();
    if faults {
        cfg.faults = MockFaults { error_rate: 0.05, malformed_rate: 0.1 };
    }
    cfg
}

impl Fuzzer {
    pub fn new(seed: u64, config: SimConfig) -> Self {
        Self { sim: Simulator::new(seed, config), rng: ChaCha8Rng::seed_from_u64(seed ^ 0xf0f0), rejected: 0 }
    }

    fn nodes(&self, pending: Option<bool>) -> Vec<NodeId> {
        self.sim.doc().nodes().filter(|n| pending.is_none_or(|p| n.is_pending() == p)).map(|n| n.id).collect()
    }

    fn anchors(&self) -> Vec<Anchor> {
        let doc = self.sim.doc();
        doc.nodes()
            .filter(|n| n.is_settled())
            .map(|n| Anchor::Node(n.id))
            .chain(doc.sections().map(|s| Anchor::Section(s.id)))
            .collect()
    }

    fn tasks(&self) -> Vec<TaskId> {
        self.sim.doc().tasks().iter().map(|t| t.id).collect()
    }

    fn random_action(&mut self) -> Option<Action> {
        let r = &mut self.rng;
        let roll = r.random_range(0..100);
        let x = r.random_range(0.0..1200.0);
        let y = r.random_range(0.0..900.0);
        let word = WORDS.choose(r).unwrap().to_string();
        let pending = self.nodes(Some(true));
        let all = self.nodes(None);
        let anchors = self.anchors();
        let tasks = self.tasks();
        let r = &mut self.rng;
        let pick_anchor = |r: &mut ChaCha8Rng| anchors.choose(r).copied();
        let pick_task = |r: &mut ChaCha8Rng| tasks.choose(r).copied();
        Some(match roll {
            0..=14 => Action::MoveCursor { x, y },
            15..=24 => {
                let kind = *[NodeKind::Keyword, NodeKind::Concept, NodeKind::StickyNote].choose(r).unwrap();
                Action::AddNode { kind, text: word, x, y }
            }
            25..=29 => Action::EditText { node: *all.choose(r)?, text: word },
            30..=32 => Action::MoveNode { node: *all.choose(r)?, x, y },
            33 => Action::DeleteNode { node: *all.choose(r)? },
            34..=36 => Action::Connect { from: *all.choose(r)?, to: *all.choose(r)?, directed: r.random_bool(0.7) },
            37 => Action::AddSection { title: word, x, y, width: 400.0, height: 300.0 },
            38..=47 => Action::Expand { anchor: pick_anchor(r)?, task: pick_task(r)? },
            48..=50 => Action::Collapse { anchor: pick_anchor(r)?, task: pick_task(r)? },
            51..=55 => Action::ClickLabel { anchor: pick_anchor(r)?, task: pick_task(r)? },
            56..=57 => Action::ExpandAll { anchor: pick_anchor(r)? },
            58 => Action::CloseAll { anchor: pick_anchor(r)? },
            59..=68 => Action::Accept { node: *pending.choose(r)? },
            69..=76 => Action::Discard { node: *pending.choose(r)? },
            77..=79 => Action::Regenerate { node: *pending.choose(r)?, feedback: *Feedback::ALL.choose(r).unwrap() },
            80..=81 => Action::Explain { node: *all.choose(r)? },
            82..=86 => {
                let scope = if r.random_bool(0.5) { Scope::Global } else { Scope::Local(pick_anchor(r)?) };
                let mode = if r.random_bool(0.7) { Initiative::Proactive } else { Initiative::Reactive };
                Action::SetInitiative { task: pick_task(r)?, scope, mode }
            }
            87..=89 => Action::SetVisibility { task: pick_task(r)?, visible: r.random_bool(0.6) },
            90..=95 => Action::RequestReactive { anchor: pick_anchor(r)?, task: pick_task(r)? },
            96 if tasks.len() > 3 => Action::DeleteTask { task: pick_task(r)? },
            _ => Action::Wait,
        })
    }

    /// One clock advance followed by one user action.
    pub fn step(&mut self) {
        let dt = self.rng.random_range(0..2500);
        let to = self.sim.now() + dt;
        self.sim.run_until(to);
        if let Some(action) = self.random_action() {
            if self.sim.apply(&action).is_err() {
                self.rejected += 1;
            }
        }
    }

    pub fn run(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
    }

    pub fn run_events(&mut self, events: usize) {
        while self.sim.doc().event_log().len() < events {
            self.step();
        }
    }
}

type Key = (Anchor, TaskId);

/// Independent oracle for the per-(element, task) lifecycle. It mirrors the
/// event stream into a shadow document and checks every phase change against
/// a fixed table of legal transitions, keyed by the event that caused it.
#[derive(Default)]
pub struct LifecycleChecker {
    pub transitions: usize,
    pub dispatches: usize,
    /// Dispatches aimed at a pair that was already busy, by its phase.
    pub busy_dispatches: BTreeMap<PhaseName, usize>,
    pub violations: Vec<String>,
}

fn phases(doc: &CanvasDocument) -> Vec<(Key, PhaseName)> {
    // `states()` iterates in key order, so the result is sorted.
    doc.states().filter(|(_, _, s)| s.phase.name() != PhaseName::Idle).map(|(a, t, s)| ((a, t), s.phase.name())).collect()
}

/// Keys whose phase differs between two sorted phase lists.
fn diff(before: &[(Key, PhaseName)], after: &[(Key, PhaseName)]) -> Vec<(Key, PhaseName, PhaseName)> {
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    loop {
        match (before.get(i), after.get(j)) {
            (Some(b), Some(a)) if b.0 == a.0 => {
                if b.1 != a.1 {
                    out.push((b.0, b.1, a.1));
                }
                i += 1;
                j += 1;
            }
            (Some(b), None) => {
                out.push((b.0, b.1, PhaseName::Idle));
                i += 1;
            }
            (Some(b), Some(a)) if b.0 < a.0 => {
                out.push((b.0, b.1, PhaseName::Idle));
                i += 1;
            }
            (_, Some(a)) => {
                out.push((a.0, PhaseName::Idle, a.1));
                j += 1;
            }
            (None, None) => break,
        }
    }
    out
}

fn legal(from: PhaseName, to: PhaseName, event: &EventKind) -> bool {
    use PhaseName::*;
    let removal = matches!(
        event,
        EventKind::TaskDeleted { .. } | EventKind::NodeDeleted { .. } | EventKind::SectionDeleted { .. }
    );
    match (from, to) {
        (Idle, InFlight) => matches!(event, EventKind::Dispatch { .. }),
        (InFlight, Curtain) => matches!(event, EventKind::CurtainShown { .. }),
        (InFlight, Idle) => matches!(event, EventKind::ResultRejected { .. }) || removal,
        (InFlight, Display) => matches!(event, EventKind::Expanded { .. }),
        (Curtain, Display) | (Unread, Display) | (Idle, Display) => matches!(event, EventKind::Expanded { .. }),
        (Curtain, Unread) => matches!(event, EventKind::UnreadMarked { .. }),
        (Display, Idle) => {
            matches!(
                event,
                EventKind::Accepted { .. } | EventKind::Discarded { .. } | EventKind::Collapsed { .. }
            ) || removal
        }
        (_, Idle) => removal,
        _ => false,
    }
}

impl LifecycleChecker {
    pub fn check(&mut self, log: &[Event]) {
        let mut shadow = CanvasDocument::new();
        let mut before = Vec::new();
        for e in log {
            if let EventKind::Dispatch { anchor, task_id, .. } = &e.event {
                self.dispatches += 1;
                let key = (*anchor, *task_id);
                if let Ok(i) = before.binary_search_by(|(k, _): &(Key, PhaseName)| k.cmp(&key)) {
                    let p = before[i].1;
                    *self.busy_dispatches.entry(p).or_default() += 1;
                    self.violations.push(format!("seq {}: dispatch on {anchor}/{task_id} while {p:?}", e.seq));
                }
            }
            if let Err(err) = shadow.push_replayed(e) {
                self.violations.push(err.to_string());
                return;
            }
            let after = phases(&shadow);
            for (k, from, to) in diff(&before, &after) {
                self.transitions += 1;
                if !legal(from, to, &e.event) {
                    self.violations.push(format!("seq {} ({}): {}/{} {from:?} -> {to:?}", e.seq, e.event.name(), k.0, k.1));
                }
            }
            before = after;
        }
    }
}

/// A random script whose element ids are guesses; actions on missing ids
/// are rejected and logged, which is part of what it exercises.
pub fn random_trace(seed: u64, len: usize) -> prewrite_core::sim::TraceScript {
    use prewrite_core::sim::{TimedAction, TraceScript};
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut at = 0;
    let mut actions = Vec::with_capacity(len);
    for _ in 0..len {
        at += r.random_range(0..3000);
        let node = NodeId(r.random_range(7..7 + len as u64));
        let anchor = Anchor::Node(node);
        let task = TaskId(r.random_range(1..=6));
        let action = match r.random_range(0..14) {
            0 | 1 => Action::MoveCursor { x: r.random_range(0.0..1000.0), y: r.random_range(0.0..800.0) },
            2..=4 => Action::AddNode {
                kind: *[NodeKind::Keyword, NodeKind::Concept, NodeKind::StickyNote].choose(&mut r).unwrap(),
                text: WORDS.choose(&mut r).unwrap().to_string(),
                x: r.random_range(0.0..1000.0),
                y: r.random_range(0.0..800.0),
            },
            5 => Action::EditText { node, text: WORDS.choose(&mut r).unwrap().to_string() },
            6 => Action::ExpandAll { anchor },
            7 => Action::AcceptCandidate { anchor, task, index: r.random_range(0..3) },
            8 => Action::DiscardCandidate { anchor, task, index: r.random_range(0..3) },
            9 => Action::ClickLabel { anchor, task },
            10 => Action::SetInitiative {
                task,
                scope: Scope::Global,
                mode: if r.random_bool(0.6) { Initiative::Proactive } else { Initiative::Reactive },
            },
            11 => Action::Connect { from: node, to: NodeId(node.0 + 1), directed: true },
            12 => Action::Regenerate { node, feedback: *Feedback::ALL.choose(&mut r).unwrap() },
            _ => Action::Wait,
        };
        actions.push(TimedAction { at, action });
    }
    TraceScript { actions, until: Some(at + 20_000) }
}
