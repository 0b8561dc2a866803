use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Axis-aligned rectangle in pixels; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub const fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Rect {
            x,
            y,
            width,
            height,
        }
    }

    pub fn right(&self) -> f64 {
        self.x + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.height
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x && p.x < self.right() && p.y >= self.y && p.y < self.bottom()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Rect,
    Polyline,
    Point,
    Wedge,
    Arrow,
    Region,
}

/// Resolved geometry of a single mark. Angles are degrees, clockwise
/// from 12 o'clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Rect(Rect),
    Polyline {
        points: Vec<Point>,
        width: f64,
    },
    Point {
        center: Point,
        radius: f64,
    },
    Wedge {
        center: Point,
        radius: f64,
        start_deg: f64,
        end_deg: f64,
    },
    Arrow {
        tail: Point,
        head: Point,
        width: f64,
    },
    Region {
        points: Vec<Point>,
    },
}

/// What a shape puts at a sample position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    Outside,
    Fill,
    Stroke,
}

impl Shape {
    pub fn kind(&self) -> ShapeKind {
        match self {
            Shape::Rect(_) => ShapeKind::Rect,
            Shape::Polyline { .. } => ShapeKind::Polyline,
            Shape::Point { .. } => ShapeKind::Point,
            Shape::Wedge { .. } => ShapeKind::Wedge,
            Shape::Arrow { .. } => ShapeKind::Arrow,
            Shape::Region { .. } => ShapeKind::Region,
        }
    }

    /// Bounding box `(x0, y0, x1, y1)` of every pixel the shape can touch.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        fn of_points<'a>(pts: impl Iterator<Item = &'a Point>, pad: f64) -> (f64, f64, f64, f64) {
            let mut b = (
                f64::INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
            );
            for p in pts {
                b.0 = b.0.min(p.x);
                b.1 = b.1.min(p.y);
                b.2 = b.2.max(p.x);
                b.3 = b.3.max(p.y);
            }
            (b.0 - pad, b.1 - pad, b.2 + pad, b.3 + pad)
        }
        match self {
            Shape::Rect(r) => (r.x, r.y, r.right(), r.bottom()),
            Shape::Polyline { points, width } => of_points(points.iter(), width / 2.0),
            Shape::Point { center, radius } => (
                center.x - radius,
                center.y - radius,
                center.x + radius,
                center.y + radius,
            ),
            Shape::Wedge { center, radius, .. } => (
                center.x - radius,
                center.y - radius,
                center.x + radius,
                center.y + radius,
            ),
            Shape::Arrow { tail, head, width } => of_points([*tail, *head].iter(), width.max(2.0)),
            Shape::Region { points } => of_points(points.iter(), 0.0),
        }
    }

    /// Classifies a sample position. Filled shapes (rect, wedge, region)
    /// report `Stroke` on an inner band of `stroke_width`; line-like
    /// shapes report `Fill` wherever their own width covers the sample.
    pub fn coverage(&self, p: Point, stroke_width: f64) -> Coverage {
        match self {
            Shape::Rect(r) => {
                if !r.contains(p) {
                    return Coverage::Outside;
                }
                let inset = (p.x - r.x)
                    .min(r.right() - p.x)
                    .min(p.y - r.y)
                    .min(r.bottom() - p.y);
                if inset < stroke_width {
                    Coverage::Stroke
                } else {
                    Coverage::Fill
                }
            }
            Shape::Polyline { points, width } => {
                let half = width / 2.0;
                let hit = if points.len() == 1 {
                    dist(p, points[0]) <= half
                } else {
                    points
                        .windows(2)
                        .any(|w| segment_distance(p, w[0], w[1]) <= half)
                };
                if hit {
                    Coverage::Fill
                } else {
                    Coverage::Outside
                }
            }
            Shape::Point { center, radius } => {
                if dist(p, *center) <= *radius {
                    Coverage::Fill
                } else {
                    Coverage::Outside
                }
            }
            Shape::Wedge {
                center,
                radius,
                start_deg,
                end_deg,
            } => {
                let d = dist(p, *center);
                let span = end_deg - start_deg;
                if d > *radius || span <= 0.0 {
                    return Coverage::Outside;
                }
                let full = span >= 360.0;
                if !full {
                    let theta = clock_angle(*center, p);
                    if theta < *start_deg || theta >= *end_deg {
                        return Coverage::Outside;
                    }
                }
                let mut near_edge = radius - d < stroke_width;
                if !full && !near_edge {
                    let a = ray_end(*center, *radius, *start_deg);
                    let b = ray_end(*center, *radius, *end_deg);
                    near_edge = segment_distance(p, *center, a) < stroke_width
                        || segment_distance(p, *center, b) < stroke_width;
                }
                if near_edge {
                    Coverage::Stroke
                } else {
                    Coverage::Fill
                }
            }
            Shape::Arrow { tail, head, width } => {
                let half = width / 2.0;
                let len = dist(*tail, *head);
                if len < 1e-9 {
                    return if dist(p, *head) <= half.max(1.0) {
                        Coverage::Fill
                    } else {
                        Coverage::Outside
                    };
                }
                if segment_distance(p, *tail, *head) <= half {
                    return Coverage::Fill;
                }
                let (l, r) = arrow_barbs(*tail, *head, *width);
                if segment_distance(p, *head, l) <= half || segment_distance(p, *head, r) <= half {
                    Coverage::Fill
                } else {
                    Coverage::Outside
                }
            }
            Shape::Region { points } => {
                if points.len() < 3 || !point_in_polygon(p, points) {
                    return Coverage::Outside;
                }
                let n = points.len();
                let near = (0..n)
                    .any(|i| segment_distance(p, points[i], points[(i + 1) % n]) < stroke_width);
                if near {
                    Coverage::Stroke
                } else {
                    Coverage::Fill
                }
            }
        }
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    math::hypot(a.x - b.x, a.y - b.y)
}

pub(crate) fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    dist(p, Point::new(a.x + t * dx, a.y + t * dy))
}

/// Angle of `p` around `center`, degrees in `[0, 360)`, clockwise from
/// 12 o'clock (screen coordinates, y down).
pub(crate) fn clock_angle(center: Point, p: Point) -> f64 {
    let deg = math::atan2(p.x - center.x, center.y - p.y).to_degrees();
    if deg < 0.0 {
        deg + 360.0
    } else {
        deg
    }
}

pub(crate) fn ray_end(center: Point, radius: f64, deg: f64) -> Point {
    let rad = deg.to_radians();
    Point::new(
        center.x + radius * math::sin(rad),
        center.y - radius * math::cos(rad),
    )
}

fn arrow_barbs(tail: Point, head: Point, width: f64) -> (Point, Point) {
    let len = dist(tail, head);
    let head_len = (len * 0.35).max(2.0 * width).min(len);
    let (ux, uy) = ((tail.x - head.x) / len, (tail.y - head.y) / len);
    let (s, c) = (math::sin(0.5), math::cos(0.5));
    let left = Point::new(
        head.x + head_len * (ux * c - uy * s),
        head.y + head_len * (ux * s + uy * c),
    );
    let right = Point::new(
        head.x + head_len * (ux * c + uy * s),
        head.y + head_len * (-ux * s + uy * c),
    );
    (left, right)
}

/// Even-odd rule.
pub(crate) fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
