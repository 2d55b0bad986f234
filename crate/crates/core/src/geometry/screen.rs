//! Screen-space footprints and leader-line predicates.

use serde::{Deserialize, Serialize};

use crate::linalg::Vec2;
use crate::scalar::Real;

/// Default overlap threshold in normalized screen-area units.
pub const EPS_OCC: f64 = 1e-6;

/// Axis-aligned screen footprint of a projected entity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenRect<T> {
    pub u_min: T,
    pub u_max: T,
    pub v_min: T,
    pub v_max: T,
    /// Distance from the eye to the entity center.
    pub depth: T,
}

impl<T: Real> ScreenRect<T> {
    /// Bounding rectangle of a point set.
    pub fn bounding(points: impl IntoIterator<Item = (T, T)>, depth: T) -> Option<Self> {
        let mut it = points.into_iter();
        let (u0, v0) = it.next()?;
        let mut r = Self {
            u_min: u0,
            u_max: u0,
            v_min: v0,
            v_max: v0,
            depth,
        };
        for (u, v) in it {
            r.u_min = r.u_min.min(u);
            r.u_max = r.u_max.max(u);
            r.v_min = r.v_min.min(v);
            r.v_max = r.v_max.max(v);
        }
        Some(r)
    }

    pub fn area(&self) -> T {
        (self.u_max - self.u_min) * (self.v_max - self.v_min)
    }

    pub fn center(&self) -> Vec2<T> {
        let half = T::lit(0.5);
        Vec2::new(
            (self.u_min + self.u_max) * half,
            (self.v_min + self.v_max) * half,
        )
    }

    pub fn overlap_area(&self, o: &Self) -> T {
        let w = self.u_max.min(o.u_max) - self.u_min.max(o.u_min);
        let h = self.v_max.min(o.v_max) - self.v_min.max(o.v_min);
        if w > T::zero() && h > T::zero() {
            w * h
        } else {
            T::zero()
        }
    }
}

/// True iff `a` covers more than `eps` of `b`'s footprint and is nearer to the eye.
pub fn occludes<T: Real>(a: &ScreenRect<T>, b: &ScreenRect<T>, eps: T) -> bool {
    a.depth < b.depth && a.overlap_area(b) > eps
}

/// A projected leader line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment2<T> {
    pub a: Vec2<T>,
    pub b: Vec2<T>,
}

impl<T: Real> Segment2<T> {
    pub fn new(a: Vec2<T>, b: Vec2<T>) -> Self {
        Self { a, b }
    }
}

/// Sign of the orientation of `c` relative to the directed line `a -> b`.
pub fn orient<T: Real>(a: Vec2<T>, b: Vec2<T>, c: Vec2<T>) -> i8 {
    let d = (b - a).cross(c - a);
    if d > T::zero() {
        1
    } else if d < T::zero() {
        -1
    } else {
        0
    }
}

/// Proper crossing in the open interior of both segments. Shared endpoints,
/// T-junctions and collinear overlap do not count.
pub fn segments_intersect<T: Real>(s1: &Segment2<T>, s2: &Segment2<T>) -> bool {
    let o1 = orient(s1.a, s1.b, s2.a);
    let o2 = orient(s1.a, s1.b, s2.b);
    let o3 = orient(s2.a, s2.b, s1.a);
    let o4 = orient(s2.a, s2.b, s1.b);
    o1 * o2 < 0 && o3 * o4 < 0
}
