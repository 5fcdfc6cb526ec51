//! Planar primitives: points, segments, orientation and the handful of
//! constructions (projection, reflection, intersection) the search is built on.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

/// Cross products with magnitude at or below this count as collinear.
pub const EPS_ORIENT: f64 = 1e-12;
/// Distance threshold for point coincidence and on-segment tests.
pub const EPS_GEOM: f64 = 1e-9;

/// A point (or free vector) in the plane. Coordinates are finite.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn dist(self, other: Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    #[inline]
    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Euclidean coincidence test.
    #[inline]
    pub fn close_to(self, other: Point, eps: f64) -> bool {
        self.dist_sq(other) <= eps * eps
    }

    #[inline]
    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product of two free vectors.
    #[inline]
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// A closed segment between two points. `a == b` is permitted; predicates
/// that need a supporting line flag it.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    #[inline]
    pub const fn new(a: Point, b: Point) -> Self {
        Segment { a, b }
    }

    #[inline]
    pub fn len(self) -> f64 {
        self.a.dist(self.b)
    }

    #[inline]
    pub fn is_degenerate(self) -> bool {
        self.a.close_to(self.b, EPS_GEOM)
    }

    /// Point at parameter `t` (0 at `a`, 1 at `b`).
    #[inline]
    pub fn at(self, t: f64) -> Point {
        self.a.lerp(self.b, t)
    }

    /// Parameter of the orthogonal projection of `p` onto the support line,
    /// unclamped. Degenerate segments project everything to 0.
    pub fn param_of(self, p: Point) -> f64 {
        let d = self.b - self.a;
        let len_sq = d.dot(d);
        if len_sq <= EPS_GEOM * EPS_GEOM {
            0.0
        } else {
            (p - self.a).dot(d) / len_sq
        }
    }
}

/// Which side of the directed line p→q the point r lies on.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Orientation {
    Left,
    Right,
    Collinear,
}

impl Orientation {
    pub fn flipped(self) -> Orientation {
        match self {
            Orientation::Left => Orientation::Right,
            Orientation::Right => Orientation::Left,
            Orientation::Collinear => Orientation::Collinear,
        }
    }
}

/// Signed area of the triangle (p, q, r), doubled: (q−p) × (r−p).
#[inline]
pub fn signed_area2(p: Point, q: Point, r: Point) -> f64 {
    (q - p).cross(r - p)
}

pub fn orientation(p: Point, q: Point, r: Point) -> Orientation {
    let area = signed_area2(p, q, r);
    if area > EPS_ORIENT {
        Orientation::Left
    } else if area < -EPS_ORIENT {
        Orientation::Right
    } else {
        Orientation::Collinear
    }
}

/// Closest point of `s` to `p` and its distance. Degenerate segments report
/// the endpoint `s.a`.
pub fn closest_point_on_segment(p: Point, s: Segment) -> (Point, f64) {
    let t = s.param_of(p).clamp(0.0, 1.0);
    let q = s.at(t);
    (q, p.dist(q))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("segment endpoints coincide; no supporting line")]
    DegenerateSegment,
}

/// Reflection of `p` across the infinite line through `s`.
pub fn mirror_across_line(p: Point, s: Segment) -> Result<Point, GeometryError> {
    if s.is_degenerate() {
        return Err(GeometryError::DegenerateSegment);
    }
    let t = s.param_of(p);
    let foot = s.at(t);
    Ok(foot + (foot - p))
}

/// Result of intersecting two segments. Collinear segments that share more
/// than a point report the overlapping sub-segment.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum SegmentIntersection {
    None,
    Point(Point),
    Overlap(Point, Point),
}

/// True if `p` lies on `s` within `EPS_GEOM`.
pub fn point_on_segment(p: Point, s: Segment) -> bool {
    closest_point_on_segment(p, s).1 <= EPS_GEOM
}

/// Intersection of two closed segments, with endpoint touches counted and
/// near-misses within `EPS_GEOM` accepted.
pub fn segment_intersection(s1: Segment, s2: Segment) -> SegmentIntersection {
    let d1 = s1.b - s1.a;
    let d2 = s2.b - s2.a;
    let denom = d1.cross(d2);

    let collinear = orientation(s1.a, s1.b, s2.a) == Orientation::Collinear
        && orientation(s1.a, s1.b, s2.b) == Orientation::Collinear;

    if s1.is_degenerate() || s2.is_degenerate() {
        // At least one side is a point; fall back to on-segment tests.
        if s1.is_degenerate() {
            if point_on_segment(s1.a, s2) {
                return SegmentIntersection::Point(s1.a);
            }
        } else if point_on_segment(s2.a, s1) {
            return SegmentIntersection::Point(s2.a);
        }
        return SegmentIntersection::None;
    }

    if collinear {
        // Project s2 onto s1's parameter space and clip.
        let ta = s1.param_of(s2.a);
        let tb = s1.param_of(s2.b);
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        let eps_t = EPS_GEOM / s1.len();
        let lo = lo.max(0.0);
        let hi = hi.min(1.0);
        if lo > hi + eps_t {
            return SegmentIntersection::None;
        }
        let p = s1.at(lo);
        let q = s1.at(hi);
        if p.close_to(q, EPS_GEOM) {
            return SegmentIntersection::Point(p);
        }
        return SegmentIntersection::Overlap(p, q);
    }

    if denom.abs() <= EPS_ORIENT {
        // Parallel, not collinear.
        return SegmentIntersection::None;
    }

    let w = s2.a - s1.a;
    let t = w.cross(d2) / denom;
    let u = w.cross(d1) / denom;
    let eps_t = EPS_GEOM / s1.len();
    let eps_u = EPS_GEOM / s2.len();
    if t < -eps_t || t > 1.0 + eps_t || u < -eps_u || u > 1.0 + eps_u {
        return SegmentIntersection::None;
    }
    SegmentIntersection::Point(s1.at(t.clamp(0.0, 1.0)))
}
