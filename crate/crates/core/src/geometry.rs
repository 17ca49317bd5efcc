//! Small planar helpers shared across modules.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Point = Vector2<f64>;

/// Wraps an angle to (−π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

pub fn rotation2(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Expresses a world-frame offset in a frame rotated by `heading`.
pub fn to_local(offset: &Point, heading: f64) -> Point {
    let (s, c) = heading.sin_cos();
    Point::new(c * offset.x + s * offset.y, -s * offset.x + c * offset.y)
}

/// A planar position with a heading, both in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Point::new(x, y),
            heading,
        }
    }

    /// Position of `other` in this pose's body frame (x forward, y to port).
    pub fn relative(&self, other: &Point) -> Point {
        to_local(&(other - self.position), self.heading)
    }
}
