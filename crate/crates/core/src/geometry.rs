//! Small 2D geometry primitives shared by the arena, dynamics and planners.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Bearing of `other` as seen from `self`, in radians.
    pub fn bearing_to(self, other: Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Robot pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Axis-aligned rectangle given by its center and half-extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: [f64; 2],
    pub half_extents: [f64; 2],
}

impl Rect {
    pub fn new(cx: f64, cy: f64, hx: f64, hy: f64) -> Self {
        Self {
            center: [cx, cy],
            half_extents: [hx, hy],
        }
    }

    pub fn min(&self) -> Point {
        Point::new(
            self.center[0] - self.half_extents[0],
            self.center[1] - self.half_extents[1],
        )
    }

    pub fn max(&self) -> Point {
        Point::new(
            self.center[0] + self.half_extents[0],
            self.center[1] + self.half_extents[1],
        )
    }

    pub fn contains(&self, p: Point) -> bool {
        let (lo, hi) = (self.min(), self.max());
        p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y
    }

    pub fn closest_point(&self, p: Point) -> Point {
        let (lo, hi) = (self.min(), self.max());
        Point::new(p.x.clamp(lo.x, hi.x), p.y.clamp(lo.y, hi.y))
    }

    /// Euclidean distance from `p` to the closed rectangle (0 inside).
    pub fn distance(&self, p: Point) -> f64 {
        p.dist(self.closest_point(p))
    }

    /// Smallest `t >= 0` at which `origin + t * dir` enters the rectangle.
    pub fn ray_hit(&self, origin: Point, dir: Point) -> Option<f64> {
        let (lo, hi) = (self.min(), self.max());
        let mut t_enter = 0.0_f64;
        let mut t_exit = f64::INFINITY;
        for (o, d, l, h) in [(origin.x, dir.x, lo.x, hi.x), (origin.y, dir.y, lo.y, hi.y)] {
            if d.abs() < 1e-15 {
                if o < l || o > h {
                    return None;
                }
            } else {
                let t1 = (l - o) / d;
                let t2 = (h - o) / d;
                let (a, b) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
                t_enter = t_enter.max(a);
                t_exit = t_exit.min(b);
                if t_enter > t_exit {
                    return None;
                }
            }
        }
        Some(t_enter)
    }

    /// True iff the closed segment `a -> b` touches the closed rectangle.
    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        let dir = b.sub(a);
        match self.ray_hit(a, dir) {
            Some(t) => t <= 1.0,
            None => false,
        }
    }

    /// The rectangle rotated by 180° about `pivot`.
    pub fn rotated_half_turn(&self, pivot: Point) -> Rect {
        Rect::new(
            2.0 * pivot.x - self.center[0],
            2.0 * pivot.y - self.center[1],
            self.half_extents[0],
            self.half_extents[1],
        )
    }
}

/// Smallest `t >= 0` at which the ray hits the circle, if any.
pub fn ray_circle_hit(origin: Point, dir: Point, center: Point, radius: f64) -> Option<f64> {
    let oc = origin.sub(center);
    let a = dir.dot(dir);
    let b = 2.0 * oc.dot(dir);
    let c = oc.dot(oc) - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / (2.0 * a);
    (t >= 0.0).then_some(t)
}
