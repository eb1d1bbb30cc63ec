//! Planar geometry shared by the world, the base and the arm.

use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Vec2 { x, y }
    }

    pub fn zero() -> Self {
        Vec2::new(T::zero(), T::zero())
    }

    /// Unit vector at `angle` radians from +x.
    pub fn from_angle(angle: T) -> Self {
        Vec2::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    pub fn rotate(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Self {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cast<U: Real>(self) -> Vec2<U> {
        Vec2::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle<T: Real>(angle: T) -> T {
    let two_pi = T::TAU();
    let mut a = angle % two_pi;
    if a > T::PI() {
        a -= two_pi;
    } else if a <= -T::PI() {
        a += two_pi;
    }
    a
}

/// Planar pose; `theta` is kept in (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Real> Pose2D<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Pose2D {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2<T> {
        Vec2::from_angle(self.theta)
    }

    /// Maps a body-frame point to the world frame.
    pub fn to_world(&self, body: Vec2<T>) -> Vec2<T> {
        self.position() + body.rotate(self.theta)
    }

    /// Maps a world point into the body frame.
    pub fn to_body(&self, world: Vec2<T>) -> Vec2<T> {
        (world - self.position()).rotate(-self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T> {
    pub a: Vec2<T>,
    pub b: Vec2<T>,
}

impl<T: Real> Segment<T> {
    pub fn new(a: Vec2<T>, b: Vec2<T>) -> Self {
        Segment { a, b }
    }

    pub fn length(&self) -> T {
        self.a.distance(self.b)
    }

    /// Closest point of the segment to `p`.
    pub fn closest_point(&self, p: Vec2<T>) -> Vec2<T> {
        let e = self.b - self.a;
        let len_sq = e.norm_sq();
        if len_sq <= T::zero() {
            return self.a;
        }
        let t = ((p - self.a).dot(e) / len_sq).max(T::zero()).min(T::one());
        self.a + e * t
    }

    pub fn distance_to(&self, p: Vec2<T>) -> T {
        self.closest_point(p).distance(p)
    }

    /// Parameter `t ≥ 0` at which the ray `origin + t·dir` first touches the
    /// segment, if it does.
    pub fn ray_intersection(&self, origin: Vec2<T>, dir: Vec2<T>) -> Option<T> {
        let e = self.b - self.a;
        let ao = self.a - origin;
        let denom = dir.cross(e);
        let eps = T::epsilon() * T::lit(16.0) * (e.norm() * dir.norm()).max(T::one());
        if denom.abs() <= eps {
            // Parallel: only a collinear overlap can hit.
            if ao.cross(dir).abs() > eps * (ao.norm().max(T::one())) {
                return None;
            }
            let dd = dir.norm_sq();
            let ta = ao.dot(dir) / dd;
            let tb = (self.b - origin).dot(dir) / dd;
            let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            return if hi < T::zero() {
                None
            } else {
                Some(lo.max(T::zero()))
            };
        }
        let t = ao.cross(e) / denom;
        let s = ao.cross(dir) / denom;
        if t >= T::zero() && s >= T::zero() && s <= T::one() {
            Some(t)
        } else {
            None
        }
    }
}

/// Distance from `p` to the nearest point of an open polyline.
pub fn distance_to_polyline<T: Real>(p: Vec2<T>, points: &[Vec2<T>]) -> T {
    match points {
        [] => T::infinity(),
        [only] => only.distance(p),
        _ => points
            .windows(2)
            .map(|w| Segment::new(w[0], w[1]).distance_to(p))
            .fold(T::infinity(), T::min),
    }
}

/// Total length of a polyline.
pub fn polyline_length<T: Real>(points: &[Vec2<T>]) -> T {
    points
        .windows(2)
        .fold(T::zero(), |acc, w| acc + w[0].distance(w[1]))
}

/// Whether the vertex loop is convex (either winding). Collinear runs are allowed.
pub fn is_convex<T: Real>(poly: &[Vec2<T>]) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let n = poly.len();
    let mut sign = T::zero();
    for i in 0..n {
        let (a, b, c) = (poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
        let z = (b - a).cross(c - b);
        if z != T::zero() {
            if sign == T::zero() {
                sign = z.signum();
            } else if z.signum() != sign {
                return false;
            }
        }
    }
    sign != T::zero()
}

/// Inclusive point-in-convex-polygon test (either winding).
pub fn convex_contains<T: Real>(poly: &[Vec2<T>], p: Vec2<T>) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut sign = T::zero();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let z = (b - a).cross(p - a);
        if z != T::zero() {
            if sign == T::zero() {
                sign = z.signum();
            } else if z.signum() != sign {
                return false;
            }
        }
    }
    true
}
