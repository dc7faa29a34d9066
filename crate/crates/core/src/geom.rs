//! Planar geometry primitives: vectors, oriented rectangles, and the
//! separating-axis overlap test used for collision detection.

use serde::{Deserialize, Serialize};

/// A 2-D vector / point in world coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector pointing along `angle` (radians, CCW from +x).
    pub fn from_angle(angle: f64) -> Self {
        Vec2::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Z component of the cross product; positive when `other` is CCW of `self`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Perpendicular vector, rotated +90 degrees (CCW).
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a <= -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    } else if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    a
}

/// Oriented rectangle: a vehicle footprint.
#[derive(Debug, Clone, Copy)]
pub struct Obb {
    pub center: Vec2,
    /// Heading of the long axis, radians.
    pub heading: f64,
    /// Half extent along the heading axis.
    pub half_len: f64,
    /// Half extent across the heading axis.
    pub half_wid: f64,
}

impl Obb {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        Obb {
            center,
            heading,
            half_len: 0.5 * length,
            half_wid: 0.5 * width,
        }
    }

    /// The four corner points, CCW.
    pub fn corners(&self) -> [Vec2; 4] {
        let u = Vec2::from_angle(self.heading);
        let v = u.perp();
        let l = u.scale(self.half_len);
        let w = v.scale(self.half_wid);
        [
            self.center + l + w,
            self.center - l + w,
            self.center - l - w,
            self.center + l - w,
        ]
    }

    /// True if the point lies inside or on the rectangle boundary.
    pub fn contains(&self, p: Vec2) -> bool {
        let u = Vec2::from_angle(self.heading);
        let d = p - self.center;
        d.dot(u).abs() <= self.half_len && d.dot(u.perp()).abs() <= self.half_wid
    }
}

/// Separating-axis overlap score between two oriented rectangles.
///
/// Projects both boxes onto the four face normals. For each axis the
/// contribution is `(sum of projected half-extents) - (projected center
/// distance)`: positive when the projections overlap. The returned score is
/// the minimum over all axes, so the boxes overlap iff the score is
/// positive, and `|score|` is a margin usable for filtering borderline pairs.
pub fn sat_overlap_score(a: &Obb, b: &Obb) -> f64 {
    let ua = Vec2::from_angle(a.heading);
    let va = ua.perp();
    let ub = Vec2::from_angle(b.heading);
    let vb = ub.perp();
    let d = b.center - a.center;
    let mut score = f64::INFINITY;
    for axis in [ua, va, ub, vb] {
        let ra = a.half_len * axis.dot(ua).abs() + a.half_wid * axis.dot(va).abs();
        let rb = b.half_len * axis.dot(ub).abs() + b.half_wid * axis.dot(vb).abs();
        let overlap = ra + rb - d.dot(axis).abs();
        if overlap < score {
            score = overlap;
        }
    }
    score
}

/// True iff the two rectangles overlap (shared boundary counts).
pub fn obb_overlap(a: &Obb, b: &Obb) -> bool {
    sat_overlap_score(a, b) >= 0.0
}

/// Axis-aligned rectangle, used for road surfaces.
#[derive(Debug, Clone, Copy)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Aabb { min, max }
    }

    /// Euclidean distance from a point to this rectangle (0 inside).
    pub fn distance(&self, p: Vec2) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        (dx * dx + dy * dy).sqrt()
    }
}

/// Closest point on the segment `[a, b]` to `p`, returned as the clamped
/// parameter `t` in [0, 1] and the point itself.
pub fn project_on_segment(p: Vec2, a: Vec2, b: Vec2) -> (f64, Vec2) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= f64::EPSILON {
        return (0.0, a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (t, a + ab.scale(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wrap_angle_stays_in_range() {
        for k in -20..20 {
            let a = 0.37 * k as f64;
            let w = wrap_angle(a);
            assert!(w > -std::f64::consts::PI - 1e-12 && w <= std::f64::consts::PI + 1e-12);
            assert_relative_eq!(w.sin(), a.sin(), epsilon = 1e-12);
            assert_relative_eq!(w.cos(), a.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn coincident_rectangles_collide() {
        let a = Obb::new(Vec2::new(1.0, 2.0), 0.3, 5.0, 2.0);
        let b = a;
        assert!(obb_overlap(&a, &b));
    }

    #[test]
    fn distant_rectangles_do_not_collide() {
        let a = Obb::new(Vec2::ZERO, 0.0, 5.0, 2.0);
        let b = Obb::new(Vec2::new(100.0, 0.0), 1.0, 5.0, 2.0);
        assert!(!obb_overlap(&a, &b));
    }

    #[test]
    fn rotated_near_miss() {
        // Two unit squares diagonally adjacent: corners touch at 45 degrees.
        let a = Obb::new(Vec2::ZERO, 0.0, 2.0, 2.0);
        let b = Obb::new(Vec2::new(2.5, 0.0), std::f64::consts::FRAC_PI_4, 2.0, 2.0);
        // b's closest corner reaches x = 2.5 - sqrt(2) ~ 1.086 > 1.0.
        assert!(!obb_overlap(&a, &b));
        let c = Obb::new(Vec2::new(2.3, 0.0), std::f64::consts::FRAC_PI_4, 2.0, 2.0);
        // now the corner reaches x ~ 0.886 < 1.0.
        assert!(obb_overlap(&a, &c));
    }

    #[test]
    fn aabb_distance_cases() {
        let r = Aabb::new(Vec2::new(-1.0, -2.0), Vec2::new(1.0, 2.0));
        assert_eq!(r.distance(Vec2::ZERO), 0.0);
        assert_relative_eq!(r.distance(Vec2::new(3.0, 0.0)), 2.0);
        assert_relative_eq!(r.distance(Vec2::new(4.0, 6.0)), 5.0); // 3-4-5 corner
    }

    #[test]
    fn segment_projection() {
        let (t, p) = project_on_segment(Vec2::new(0.5, 1.0), Vec2::ZERO, Vec2::new(1.0, 0.0));
        assert_relative_eq!(t, 0.5);
        assert_relative_eq!(p.x, 0.5);
        assert_relative_eq!(p.y, 0.0);
        let (t, _) = project_on_segment(Vec2::new(-3.0, 0.0), Vec2::ZERO, Vec2::new(1.0, 0.0));
        assert_eq!(t, 0.0);
    }
}
