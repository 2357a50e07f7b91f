//! Oriented boxes, convex polygons and exact rotated IoU.
//!
//! Coordinates are image pixels with x growing right and y growing down.
//! `theta` rotates the box's `w` axis from +x toward +y.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for vertex and area comparisons.
pub const GEOM_EPS: f64 = 1e-9;
/// Half-plane membership slack used while clipping.
pub const CLIP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn distance(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

/// Axis-aligned bounds `[xmin, xmax] x [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Aabb {
    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            xmin: self.xmin.min(o.xmin),
            ymin: self.ymin.min(o.ymin),
            xmax: self.xmax.max(o.xmax),
            ymax: self.ymax.max(o.ymax),
        }
    }

    pub fn intersection_area(&self, o: &Aabb) -> f64 {
        let w = self.xmax.min(o.xmax) - self.xmin.max(o.xmin);
        let h = self.ymax.min(o.ymax) - self.ymin.max(o.ymin);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.xmin <= o.xmax && o.xmin <= self.xmax && self.ymin <= o.ymax && o.ymin <= self.ymax
    }

    /// IoU of two axis-aligned rectangles.
    pub fn iou(&self, o: &Aabb) -> f64 {
        let inter = self.intersection_area(o);
        let union = self.area() + o.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).clamp(0.0, 1.0)
        }
    }
}

/// Five-parameter rotated rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub cx: f64,
    pub cy: f64,
    /// Extent along the angle axis.
    pub w: f64,
    /// Extent perpendicular to the angle axis.
    pub h: f64,
    pub theta: f64,
}

impl OrientedBox {
    /// Builds a validated box.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        let b = Self { cx, cy, w, h, theta };
        b.validate()?;
        Ok(b)
    }

    /// Builds a box from an angle in degrees.
    pub fn from_degrees(cx: f64, cy: f64, w: f64, h: f64, theta_deg: f64) -> Result<Self> {
        Self::new(cx, cy, w, h, theta_deg.to_radians())
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.cx, self.cy, self.w, self.h, self.theta];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite field in {self:?}")));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "extents must be positive, got w={} h={}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.cx, self.cy, self.w, self.h, self.theta]
    }

    pub fn from_array(p: [f64; 5]) -> Self {
        Self {
            cx: p[0],
            cy: p[1],
            w: p[2],
            h: p[3],
            theta: p[4],
        }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.w + self.h)
    }

    pub fn long_side(&self) -> f64 {
        self.w.max(self.h)
    }

    pub fn short_side(&self) -> f64 {
        self.w.min(self.h)
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    /// Maps an image point into the box frame `(u, v)`, `u` along `w`.
    #[inline]
    pub fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let dx = x - self.cx;
        let dy = y - self.cy;
        (dx * c + dy * s, -dx * s + dy * c)
    }

    /// Closed-set membership test.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (u, v) = self.to_local(x, y);
        u.abs() <= 0.5 * self.w && v.abs() <= 0.5 * self.h
    }

    /// Tight axis-aligned hull.
    pub fn hbb(&self) -> Aabb {
        let (s, c) = self.theta.sin_cos();
        let ex = 0.5 * (c.abs() * self.w + s.abs() * self.h);
        let ey = 0.5 * (s.abs() * self.w + c.abs() * self.h);
        Aabb {
            xmin: self.cx - ex,
            ymin: self.cy - ey,
            xmax: self.cx + ex,
            ymax: self.cy + ey,
        }
    }

    /// Returns the unique representative of this box's point set.
    ///
    /// The representative has `w >= h` and `theta` in `(-pi/2, pi/2]`. Squares
    /// have a quarter-turn symmetry, so their angle is reduced to `(-pi/4, pi/4]`.
    pub fn canonicalize(&self) -> Result<Self> {
        self.validate()?;
        let (mut w, mut h, mut theta) = (self.w, self.h, self.theta);
        if h > w {
            std::mem::swap(&mut w, &mut h);
            theta += FRAC_PI_2;
        }
        let period = if w == h { FRAC_PI_2 } else { PI };
        Ok(Self {
            cx: self.cx,
            cy: self.cy,
            w,
            h,
            theta: wrap_angle(theta, period),
        })
    }

    pub fn corners(&self) -> ConvexPolygon {
        let (s, c) = self.theta.sin_cos();
        let hw = 0.5 * self.w;
        let hh = 0.5 * self.h;
        let at = |u: f64, v: f64| Point::new(self.cx + u * c - v * s, self.cy + u * s + v * c);
        ConvexPolygon {
            vertices: vec![at(-hw, -hh), at(hw, -hh), at(hw, hh), at(-hw, hh)],
        }
    }

    /// Rigid motion: rotate by `angle` about `pivot`, then translate.
    pub fn transformed(&self, pivot: Point, angle: f64, dx: f64, dy: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let px = self.cx - pivot.x;
        let py = self.cy - pivot.y;
        Self {
            cx: pivot.x + px * c - py * s + dx,
            cy: pivot.y + px * s + py * c + dy,
            w: self.w,
            h: self.h,
            theta: self.theta + angle,
        }
    }
}

/// Wraps `angle` into `(-period/2, period/2]`.
pub fn wrap_angle(angle: f64, period: f64) -> f64 {
    let half = 0.5 * period;
    if angle > -half && angle <= half {
        return angle;
    }
    let mut r = angle - period * (angle / period).round();
    if r <= -half {
        r += period;
    } else if r > half {
        r -= period;
    }
    r
}

/// Counter-clockwise (positive shoelace area) convex vertex ring.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        let poly = Self { vertices };
        if poly.signed_area() <= 0.0 {
            return Err(Error::InvalidPolygon(
                "vertices must have positive signed area".into(),
            ));
        }
        let n = poly.vertices.len();
        for i in 0..n {
            let a = poly.vertices[i];
            let b = poly.vertices[(i + 1) % n];
            let c = poly.vertices[(i + 2) % n];
            let turn = b.sub(a).cross(c.sub(b));
            let scale = b.distance(a) * c.distance(b);
            if turn < -GEOM_EPS * scale.max(1.0) {
                return Err(Error::InvalidPolygon(format!("reflex vertex at index {}", (i + 1) % n)));
            }
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let twice: f64 = (0..n)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n]))
            .sum();
        0.5 * twice
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| self.vertices[i].distance(self.vertices[(i + 1) % n]))
            .sum()
    }
}

/// Intersection of two convex polygons by successive half-plane clipping.
///
/// Returns `None` when the overlap is empty or has area below `1e-12`.
pub fn intersect_convex(a: &ConvexPolygon, b: &ConvexPolygon) -> Option<ConvexPolygon> {
    if a.area() < 1e-12 || b.area() < 1e-12 {
        return None;
    }
    let clip = &b.vertices;
    let mut out = a.vertices.clone();
    let mut input = Vec::with_capacity(out.len() + clip.len());
    for i in 0..clip.len() {
        if out.is_empty() {
            return None;
        }
        let start = clip[i];
        let end = clip[(i + 1) % clip.len()];
        let edge = end.sub(start);
        let len = edge.x.hypot(edge.y);
        if len == 0.0 {
            continue;
        }
        std::mem::swap(&mut input, &mut out);
        out.clear();
        let dist = |p: Point| edge.cross(p.sub(start)) / len;
        for j in 0..input.len() {
            let cur = input[j];
            let next = input[(j + 1) % input.len()];
            let dc = dist(cur);
            let dn = dist(next);
            let cur_in = dc >= -CLIP_EPS;
            let next_in = dn >= -CLIP_EPS;
            if cur_in {
                out.push(cur);
            }
            if cur_in != next_in {
                let t = dc / (dc - dn);
                out.push(Point::new(
                    cur.x + t * (next.x - cur.x),
                    cur.y + t * (next.y - cur.y),
                ));
            }
        }
    }
    out.dedup_by(|p, q| p.distance(*q) < CLIP_EPS);
    while out.len() > 1 && out[0].distance(out[out.len() - 1]) < CLIP_EPS {
        out.pop();
    }
    if out.len() < 3 {
        return None;
    }
    let poly = ConvexPolygon { vertices: out };
    if poly.signed_area() < 1e-12 {
        return None;
    }
    Some(poly)
}

/// Exact intersection area of two boxes.
pub fn intersection_area(a: &OrientedBox, b: &OrientedBox) -> f64 {
    if !a.hbb().overlaps(&b.hbb()) {
        return 0.0;
    }
    intersect_convex(&a.corners(), &b.corners()).map_or(0.0, |p| p.area())
}

/// Polygon-clipping IoU of two oriented boxes.
pub fn skew_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    if a == b {
        // clipping round-off would otherwise leave this a few ulps short
        return 1.0;
    }
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// IoU of the boxes' axis-aligned hulls.
pub fn hbb_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    a.hbb().iou(&b.hbb())
}
