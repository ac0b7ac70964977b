//! Small 2-D geometry kit: points, axis-aligned rectangles, segment tests.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dist2(self, other: Point) -> f64 {
        let d = self - other;
        d.x * d.x + d.y * d.y
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Unit vector in the same direction, or zero for the zero vector.
    pub fn normalized(self) -> Point {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Point::default()
        }
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Axis-aligned rectangle given by its lower-left corner and size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Rect { x, y, w, h }
    }

    pub fn x_max(&self) -> f64 {
        self.x + self.w
    }

    pub fn y_max(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Closed containment (boundary counts as inside).
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x && p.x <= self.x_max() && p.y >= self.y && p.y <= self.y_max()
    }

    /// Open-interior containment.
    pub fn contains_strict(&self, p: Point) -> bool {
        p.x > self.x && p.x < self.x_max() && p.y > self.y && p.y < self.y_max()
    }

    /// Rectangle grown by `m` on every side.
    pub fn inflate(&self, m: f64) -> Rect {
        Rect::new(self.x - m, self.y - m, self.w + 2.0 * m, self.h + 2.0 * m)
    }

    /// True when the open interiors overlap.
    pub fn overlaps(&self, o: &Rect) -> bool {
        self.x < o.x_max() && o.x < self.x_max() && self.y < o.y_max() && o.y < self.y_max()
    }

    /// Euclidean distance from `p` to the closed rectangle (zero inside).
    pub fn distance_to(&self, p: Point) -> f64 {
        let dx = (self.x - p.x).max(0.0).max(p.x - self.x_max());
        let dy = (self.y - p.y).max(0.0).max(p.y - self.y_max());
        dx.hypot(dy)
    }

    /// True when the segment `a -> b` passes through the open interior.
    ///
    /// Slab clipping with open slabs: touching an edge or grazing a corner
    /// does not count as an intersection.
    pub fn segment_hits_interior(&self, a: Point, b: Point) -> bool {
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        for (p, d, min, max) in [
            (a.x, b.x - a.x, self.x, self.x_max()),
            (a.y, b.y - a.y, self.y, self.y_max()),
        ] {
            if d == 0.0 {
                if p <= min || p >= max {
                    return false;
                }
            } else {
                let t0 = (min - p) / d;
                let t1 = (max - p) / d;
                let (enter, exit) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
                lo = lo.max(enter);
                hi = hi.min(exit);
                if lo >= hi {
                    return false;
                }
            }
        }
        lo < hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_through_center_hits() {
        let r = Rect::new(10.0, 10.0, 10.0, 10.0);
        assert!(r.segment_hits_interior(Point::new(0.0, 15.0), Point::new(30.0, 15.0)));
        assert!(r.segment_hits_interior(Point::new(15.0, 0.0), Point::new(15.0, 30.0)));
    }

    #[test]
    fn corner_graze_and_edge_slide_do_not_hit() {
        let r = Rect::new(10.0, 10.0, 10.0, 10.0);
        // The line y = x + 10 meets the closed rectangle only at the corner (10, 20).
        assert!(!r.segment_hits_interior(Point::new(0.0, 10.0), Point::new(20.0, 30.0)));
        // Segment that stops exactly at a corner.
        assert!(!r.segment_hits_interior(Point::new(5.0, 25.0), Point::new(10.0, 20.0)));
        // Along the top edge.
        assert!(!r.segment_hits_interior(Point::new(0.0, 20.0), Point::new(30.0, 20.0)));
        // Shifted one millimetre down, the same diagonal clips the corner.
        assert!(r.segment_hits_interior(Point::new(0.0, 9.999), Point::new(20.0, 29.999)));
    }

    #[test]
    fn degenerate_segment() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        let p = Point::new(3.0, 3.0);
        assert!(!r.segment_hits_interior(p, p));
        let q = Point::new(0.5, 0.5);
        assert!(r.segment_hits_interior(q, q));
    }

    #[test]
    fn distance_and_inflate() {
        let r = Rect::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(r.distance_to(Point::new(5.0, 1.0)), 3.0);
        assert_eq!(r.distance_to(Point::new(1.0, 1.0)), 0.0);
        assert_eq!(r.inflate(0.5), Rect::new(-0.5, -0.5, 3.0, 3.0));
        assert!(!r.overlaps(&Rect::new(2.0, 0.0, 1.0, 1.0)));
        assert!(r.overlaps(&Rect::new(1.9, 0.0, 1.0, 1.0)));
    }
}
