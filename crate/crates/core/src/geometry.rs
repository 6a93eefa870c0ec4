//! Canvas geometry in pixels.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Size2<T> {
    pub width: T,
    pub height: T,
}

impl<T: Scalar> Size2<T> {
    pub fn new(width: T, height: T) -> Self {
        Self { width, height }
    }

    /// Both extents strictly positive and finite.
    pub fn is_positive(self) -> bool {
        self.width.is_finite() && self.height.is_finite() && self.width > T::zero() && self.height > T::zero()
    }
}

/// Axis-aligned rectangle; `x`/`y` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rect2<T> {
    pub x: T,
    pub y: T,
    pub width: T,
    pub height: T,
}

impl<T: Scalar> Rect2<T> {
    pub fn new(origin: Point2<T>, size: Size2<T>) -> Self {
        Self { x: origin.x, y: origin.y, width: size.width, height: size.height }
    }

    pub fn origin(self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }

    pub fn size(self) -> Size2<T> {
        Size2::new(self.width, self.height)
    }

    pub fn center(self) -> Point2<T> {
        let two = T::one() + T::one();
        Point2::new(self.x + self.width / two, self.y + self.height / two)
    }

    pub fn right(self) -> T {
        self.x + self.width
    }

    /// Strict interior test: points on the border are outside.
    pub fn contains_strict(self, p: Point2<T>) -> bool {
        p.x > self.x && p.x < self.x + self.width && p.y > self.y && p.y < self.y + self.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_containment_excludes_border() {
        let r = Rect2::new(Point2::new(0.0_f64, 0.0), Size2::new(10.0, 10.0));
        assert!(r.contains_strict(Point2::new(5.0, 5.0)));
        assert!(!r.contains_strict(Point2::new(0.0, 5.0)));
        assert!(!r.contains_strict(Point2::new(10.0, 5.0)));
        assert!(!r.contains_strict(Point2::new(5.0, 10.0)));
    }

    #[test]
    fn works_for_f32() {
        let r = Rect2::new(Point2::new(2.0_f32, 4.0), Size2::new(6.0, 2.0));
        assert_eq!(r.center(), Point2::new(5.0, 5.0));
        assert_eq!(Point2::new(0.0_f32, 0.0).distance(Point2::new(3.0, 4.0)), 5.0);
    }
}
