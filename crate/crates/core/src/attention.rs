//! Attention inference: a Fitts'-law index of difficulty per candidate and
//! the sampling distribution over candidates of one input type.
//!
//! The weight of candidate `i` is its index of difficulty and the draw
//! probability is `ID_i / sum_j ID_j`. Distances are clamped to at least
//! half the target width so the index never goes negative.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::document::CanvasDocument;
use crate::geometry::Point2;
use crate::ids::Anchor;
use crate::scalar::Scalar;
use crate::tasks::InputType;
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Probability proportional to the index of difficulty.
    AsWritten,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub tick_seconds: f64,
    pub weight_mode: WeightMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { tick_seconds: 5.0, weight_mode: WeightMode::AsWritten }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionScore<T> {
    pub anchor: Anchor,
    pub id_value: T,
    pub distance: T,
    pub width: T,
}

/// `log2(2 * max(D, W/2) / W)`, where `D` is the cursor-to-center distance.
/// Returns `(id, D)`.
pub fn index_of_difficulty<T: Scalar>(cursor: Point2<T>, center: Point2<T>, width: T) -> (T, T) {
    let two = T::one() + T::one();
    let distance = cursor.distance(center);
    let clamped = distance.max(width / two);
    ((two * clamped / width).log2().max(T::zero()), distance)
}

/// Index into `weights`, drawn proportionally. Falls back to uniform when no
/// weight is positive. `None` only for an empty slice.
pub fn weighted_pick<T: Scalar, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> Option<usize> {
    if weights.is_empty() {
        return None;
    }
    let total: f64 = weights.iter().map(|w| w.to_f64_lossy().max(0.0)).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Some(rng.random_range(0..weights.len()));
    }
    let mut target = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        let w = w.to_f64_lossy().max(0.0);
        if w > 0.0 {
            last_positive = i;
            if target < w {
                return Some(i);
            }
            target -= w;
        }
    }
    Some(last_positive)
}

/// Normalised draw probabilities for a set of scores (uniform if all are zero).
pub fn probabilities<T: Scalar>(scores: &[AttentionScore<T>]) -> Vec<f64> {
    let total: f64 = scores.iter().map(|s| s.id_value.to_f64_lossy()).sum();
    if total > 0.0 {
        scores.iter().map(|s| s.id_value.to_f64_lossy() / total).collect()
    } else {
        vec![1.0 / scores.len() as f64; scores.len()]
    }
}

/// Candidates of one input type: settled nodes of the matching kind, all
/// settled primitive nodes for two-node inputs, or sections (by rect width).
pub fn candidates(doc: &CanvasDocument, input: InputType) -> Vec<(Anchor, Point, f64)> {
    match input {
        InputType::Section => doc.sections().map(|s| (Anchor::Section(s.id), s.rect.center(), s.rect.width)).collect(),
        _ => doc
            .nodes()
            .filter(|n| n.is_settled() && (input == InputType::Nodes || InputType::of_kind(n.kind) == input))
            .map(|n| (Anchor::Node(n.id), n.center(), n.size.width))
            .collect(),
    }
}

pub fn scores(doc: &CanvasDocument, input: InputType) -> Vec<AttentionScore<f64>> {
    let cursor = doc.cursor();
    candidates(doc, input)
        .into_iter()
        .map(|(anchor, center, width)| {
            let (id_value, distance) = index_of_difficulty(cursor, center, width);
            AttentionScore { anchor, id_value, distance, width }
        })
        .collect()
}

/// Draws one element of the given input type around the current cursor.
pub fn sample<R: Rng + ?Sized>(doc: &CanvasDocument, input: InputType, rng: &mut R) -> Option<Anchor> {
    let scores = scores(doc, input);
    let weights: Vec<f64> = scores.iter().map(|s| s.id_value).collect();
    weighted_pick(&weights, rng).map(|i| scores[i].anchor)
}
