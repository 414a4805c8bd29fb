//! Small planar polygon toolkit used by the silhouette and coverage code.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

pub type Point2 = Vector2<f64>;

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    pub fn unit() -> Self {
        Self::new(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Point2 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// Signed shoelace area; positive for counter-clockwise outlines.
pub fn signed_area(outline: &[Point2]) -> f64 {
    if outline.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, a) in outline.iter().enumerate() {
        let b = &outline[(i + 1) % outline.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

pub fn area(outline: &[Point2]) -> f64 {
    signed_area(outline).abs()
}

/// Sutherland-Hodgman clip of `outline` against `rect`.
///
/// Exact for any simple subject polygon since the clip region is convex;
/// concave subjects may come back with zero-width bridges along the
/// rectangle edges, which do not change the area.
pub fn clip_to_rect(outline: &[Point2], rect: &Rect) -> Vec<Point2> {
    // (axis, bound, keep-greater)
    let edges = [(0, rect.min.x, true), (0, rect.max.x, false), (1, rect.min.y, true), (1, rect.max.y, false)];
    let mut poly = outline.to_vec();
    for (axis, bound, keep_greater) in edges {
        if poly.is_empty() {
            break;
        }
        let inside = |p: &Point2| if keep_greater { p[axis] >= bound } else { p[axis] <= bound };
        let mut out = Vec::with_capacity(poly.len() + 4);
        for (i, cur) in poly.iter().enumerate() {
            let prev = &poly[(i + poly.len() - 1) % poly.len()];
            let (cur_in, prev_in) = (inside(cur), inside(prev));
            if cur_in != prev_in {
                let t = (bound - prev[axis]) / (cur[axis] - prev[axis]);
                let mut hit = prev + (cur - prev) * t;
                hit[axis] = bound;
                out.push(hit);
            }
            if cur_in {
                out.push(*cur);
            }
        }
        poly = out;
    }
    poly
}

/// True when no two non-adjacent edges intersect and no edge is degenerate.
pub fn is_simple(outline: &[Point2]) -> bool {
    let n = outline.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (outline[i], outline[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (outline[j], outline[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, side: f64) -> Vec<Point2> {
        vec![
            Point2::new(x0, y0),
            Point2::new(x0 + side, y0),
            Point2::new(x0 + side, y0 + side),
            Point2::new(x0, y0 + side),
        ]
    }

    #[test]
    fn shoelace_area_and_orientation() {
        let sq = square(0.0, 0.0, 2.0);
        assert_eq!(signed_area(&sq), 4.0);
        let rev: Vec<_> = sq.iter().rev().copied().collect();
        assert_eq!(signed_area(&rev), -4.0);
    }

    #[test]
    fn clipping_a_straddling_square() {
        let clipped = clip_to_rect(&square(0.5, 0.5, 1.0), &Rect::unit());
        assert!((area(&clipped) - 0.25).abs() < 1e-15);
        assert!(clip_to_rect(&square(2.0, 2.0, 1.0), &Rect::unit()).is_empty());
        let inside = square(0.25, 0.25, 0.5);
        assert_eq!(clip_to_rect(&inside, &Rect::unit()), inside);
    }

    #[test]
    fn clipping_a_concave_polygon_keeps_area() {
        // U-shape whose two prongs leave the top of the unit square.
        let u = vec![
            Point2::new(0.1, 0.1),
            Point2::new(0.9, 0.1),
            Point2::new(0.9, 1.5),
            Point2::new(0.7, 1.5),
            Point2::new(0.7, 0.5),
            Point2::new(0.3, 0.5),
            Point2::new(0.3, 1.5),
            Point2::new(0.1, 1.5),
        ];
        let clipped = clip_to_rect(&u, &Rect::unit());
        let expected = 0.8 * 0.4 + 2.0 * 0.2 * 0.5;
        assert!((area(&clipped) - expected).abs() < 1e-12);
    }

    #[test]
    fn simplicity() {
        assert!(is_simple(&square(0.0, 0.0, 1.0)));
        let bowtie = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        assert!(!is_simple(&bowtie));
        assert!(!is_simple(&[Point2::zeros(), Point2::zeros(), Point2::new(1.0, 0.0)]));
    }
}
