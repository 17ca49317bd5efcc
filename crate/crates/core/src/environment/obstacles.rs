//! Moving obstacles: replayed tracks, constant-velocity prediction and the
//! ellipse geometry used for constraints and collision checks.

use crate::error::{Error, Result};
use crate::geometry::{to_local, Point};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VesselClass {
    SmallMotorboat,
    Sailboat,
    MusclePowered,
    Commercial,
    LongVessel,
}

/// One timestamped pose of a replayed track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    #[serde(default)]
    pub speed: f64,
}

/// Footprint and classification of an obstacle, independent of its motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleInfo {
    pub id: String,
    /// Semi-major axis (m), along the heading.
    pub a: f64,
    /// Semi-minor axis (m).
    pub b: f64,
    pub vessel_class: VesselClass,
    /// Hull length (m).
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleTrack {
    #[serde(flatten)]
    pub info: ObstacleInfo,
    pub samples: Vec<ObstacleSample>,
}

/// Instantaneous obstacle pose and world-frame velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleState {
    pub position: Point,
    pub heading: f64,
    pub velocity: Point,
}

/// Predicted obstacle states for stages `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstaclePrediction {
    pub stages: Vec<ObstacleState>,
}

impl ObstacleInfo {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidTrack { id: self.id.clone(), reason });
        if !(self.b > 0.0 && self.a >= self.b && self.a.is_finite()) {
            return bad(format!("axes must satisfy a >= b > 0, got a = {}, b = {}", self.a, self.b));
        }
        if !(self.length >= 0.0 && self.length.is_finite()) {
            return bad(format!("length must be non-negative, got {}", self.length));
        }
        Ok(())
    }
}

impl ObstacleTrack {
    pub fn validate(&self) -> Result<()> {
        self.info.validate()?;
        let bad = |reason: String| Err(Error::InvalidTrack { id: self.info.id.clone(), reason });
        if self.samples.is_empty() {
            return bad("track has no samples".into());
        }
        for s in &self.samples {
            if ![s.t, s.x, s.y, s.heading, s.speed].iter().all(|v| v.is_finite()) {
                return bad(format!("non-finite sample at t = {}", s.t));
            }
        }
        if let Some(w) = self.samples.windows(2).find(|w| w[1].t <= w[0].t) {
            return bad(format!("timestamps not strictly increasing at t = {}", w[1].t));
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.info.id
    }

    /// Pose by linear interpolation between bracketing samples; velocity by
    /// finite difference of those samples. Outside the sampled range the
    /// endpoint pose is held at rest. A single-sample track moves with its
    /// recorded speed along its heading.
    pub fn state_at(&self, t: f64) -> ObstacleState {
        let s = &self.samples;
        let at = |k: &ObstacleSample, velocity| ObstacleState {
            position: Point::new(k.x, k.y),
            heading: k.heading,
            velocity,
        };
        if s.len() == 1 {
            let k = &s[0];
            let v = Point::new(k.heading.cos(), k.heading.sin()) * k.speed;
            return ObstacleState {
                position: Point::new(k.x, k.y) + v * (t - k.t),
                heading: k.heading,
                velocity: v,
            };
        }
        if t < s[0].t {
            return at(&s[0], Point::zeros());
        }
        let last = s.len() - 1;
        if t > s[last].t {
            return at(&s[last], Point::zeros());
        }
        let i = s.partition_point(|k| k.t <= t).clamp(1, last) - 1;
        let (k0, k1) = (&s[i], &s[i + 1]);
        let dt = k1.t - k0.t;
        let velocity = Point::new(k1.x - k0.x, k1.y - k0.y) / dt;
        if t == k0.t {
            return at(k0, velocity);
        }
        if t == k1.t {
            return at(k1, velocity);
        }
        let w = (t - k0.t) / dt;
        let dh = crate::geometry::wrap_angle(k1.heading - k0.heading);
        ObstacleState {
            position: Point::new(k0.x + w * (k1.x - k0.x), k0.y + w * (k1.y - k0.y)),
            heading: crate::geometry::wrap_angle(k0.heading + w * dh),
            velocity,
        }
    }
}

/// Constant-velocity prediction from the track state at `t_now`.
pub fn predict_obstacle(track: &ObstacleTrack, t_now: f64, tau: f64, n: usize) -> ObstaclePrediction {
    predict_from_state(&track.state_at(t_now), tau, n)
}

pub fn predict_from_state(state: &ObstacleState, tau: f64, n: usize) -> ObstaclePrediction {
    let stages = (0..=n)
        .map(|k| ObstacleState {
            position: state.position + state.velocity * (k as f64 * tau),
            ..*state
        })
        .collect();
    ObstaclePrediction { stages }
}

/// Quadratic form of the disc offset in the obstacle's ellipse frame;
/// the disc center is clear of the ellipse iff the value exceeds 1.
pub fn dynamic_constraint_value(disc_center: &Point, obs_position: &Point, heading: f64, alpha: f64, beta: f64) -> f64 {
    let q = to_local(&(disc_center - obs_position), heading);
    (q.x / alpha).powi(2) + (q.y / beta).powi(2)
}

/// Euclidean distance from `p` to the ellipse with semi-axes `a ≥ b` along
/// `heading`; zero when `p` is on or inside the ellipse.
pub fn point_ellipse_distance(p: &Point, center: &Point, heading: f64, a: f64, b: f64) -> f64 {
    let q = to_local(&(p - center), heading);
    if (q.x / a).powi(2) + (q.y / b).powi(2) <= 1.0 {
        return 0.0;
    }
    let (a, b, y0, y1) = if a >= b {
        (a, b, q.x.abs(), q.y.abs())
    } else {
        (b, a, q.y.abs(), q.x.abs())
    };
    closest_on_ellipse_quadrant(a, b, y0, y1)
}

/// Distance from an exterior first-quadrant point to the ellipse
/// `(x/e0)² + (y/e1)² = 1` with `e0 ≥ e1`, by bisection on the Lagrange
/// multiplier equation.
fn closest_on_ellipse_quadrant(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let r0 = (e0 / e1).powi(2);
            let g = |s: f64| (r0 * z0 / (s + r0)).powi(2) + (z1 / (s + 1.0)).powi(2) - 1.0;
            let mut s0 = z1 - 1.0;
            let mut s1 = (r0 * z0).hypot(z1) - 1.0;
            let mut s = s0;
            for _ in 0..200 {
                s = 0.5 * (s0 + s1);
                if s == s0 || s == s1 {
                    break;
                }
                let v = g(s);
                if v > 0.0 {
                    s0 = s;
                } else if v < 0.0 {
                    s1 = s;
                } else {
                    break;
                }
            }
            let x0 = r0 * y0 / (s + r0);
            let x1 = y1 / (s + 1.0);
            (x0 - y0).hypot(x1 - y1)
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer = e0 * y0;
        let denom = e0 * e0 - e1 * e1;
        if numer < denom {
            let xde0 = numer / denom;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).max(0.0).sqrt();
            (x0 - y0).hypot(x1)
        } else {
            (y0 - e0).abs()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn info(id: &str) -> ObstacleInfo {
        ObstacleInfo {
            id: id.into(),
            a: 0.6,
            b: 0.3,
            vessel_class: VesselClass::SmallMotorboat,
            length: 1.2,
        }
    }

    fn sample(t: f64, x: f64, y: f64) -> ObstacleSample {
        ObstacleSample { t, x, y, heading: 0.0, speed: 0.0 }
    }

    fn track(samples: Vec<ObstacleSample>) -> ObstacleTrack {
        ObstacleTrack { info: info("boat"), samples }
    }

    #[test]
    fn validation() {
        assert!(track(vec![sample(0.0, 0.0, 0.0), sample(1.0, 1.0, 0.0)]).validate().is_ok());
        let err = track(vec![sample(1.0, 0.0, 0.0), sample(1.0, 1.0, 0.0)]).validate().unwrap_err();
        assert!(err.to_string().contains("boat"));
        assert!(track(vec![]).validate().is_err());
        let mut t = track(vec![sample(0.0, 0.0, 0.0)]);
        t.info.b = 0.9;
        assert!(t.validate().is_err());
    }

    #[test]
    fn class_names_are_snake_case() {
        let s = serde_json::to_string(&VesselClass::MusclePowered).unwrap();
        assert_eq!(s, "\"muscle_powered\"");
    }

    #[test]
    fn state_at_knot_and_midpoint() {
        let tr = track(vec![sample(0.0, 0.0, 0.0), sample(2.0, 2.0, 0.0), sample(3.0, 2.0, 3.0)]);
        let s = tr.state_at(2.0);
        assert_eq!(s.position, Point::new(2.0, 0.0));
        let m = tr.state_at(1.0);
        assert_eq!(m.position, Point::new(1.0, 0.0));
        assert_eq!(m.velocity, Point::new(1.0, 0.0));
        assert_eq!(tr.state_at(2.5).velocity, Point::new(0.0, 3.0));
        let before = tr.state_at(-1.0);
        assert_eq!(before.position, Point::zeros());
        assert_eq!(before.velocity, Point::zeros());
        assert_eq!(tr.state_at(10.0).position, Point::new(2.0, 3.0));
    }

    #[test]
    fn state_at_matches_lerp_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut t = 0.0;
        let samples: Vec<_> = (0..20)
            .map(|_| {
                t += rng.gen_range(0.1..2.0);
                sample(t, rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0))
            })
            .collect();
        let tr = track(samples.clone());
        let mut max_dev: f64 = 0.0;
        for i in 0..=5000 {
            let q = samples[0].t + (samples[19].t - samples[0].t) * i as f64 / 5000.0;
            let j = samples.iter().rposition(|s| s.t <= q).unwrap().min(18);
            let (s0, s1) = (samples[j], samples[j + 1]);
            let w = (q - s0.t) / (s1.t - s0.t);
            let oracle = if w == 1.0 {
                Point::new(s1.x, s1.y)
            } else {
                Point::new(s0.x + w * (s1.x - s0.x), s0.y + w * (s1.y - s0.y))
            };
            max_dev = max_dev.max((tr.state_at(q).position - oracle).norm());
        }
        assert_eq!(max_dev, 0.0);
    }

    #[test]
    fn single_sample_track_moves_with_speed() {
        let tr = track(vec![ObstacleSample { t: 0.0, x: 1.0, y: 0.0, heading: FRAC_PI_2, speed: 2.0 }]);
        let s = tr.state_at(1.5);
        assert!((s.position - Point::new(1.0, 3.0)).norm() < 1e-12);
        assert!((s.velocity - Point::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn prediction_examples() {
        let still = ObstacleState { position: Point::new(3.0, 1.0), heading: 0.2, velocity: Point::zeros() };
        let p = predict_from_state(&still, 0.5, 20);
        assert_eq!(p.stages.len(), 21);
        assert!(p.stages.iter().all(|s| s.position == still.position));
        let moving = ObstacleState { velocity: Point::new(1.0, 0.0), position: Point::zeros(), heading: 0.0 };
        let p = predict_from_state(&moving, 0.5, 20);
        assert_eq!(p.stages[4].position, Point::new(2.0, 0.0));
        assert_eq!(p.stages[0], moving);
    }

    #[test]
    fn ellipse_value_examples() {
        let o = Point::new(2.0, -1.0);
        assert_eq!(dynamic_constraint_value(&o, &o, 0.4, 1.0, 0.5), 0.0);
        assert!((dynamic_constraint_value(&Point::new(3.5, 0.0), &Point::new(2.0, 0.0), 0.0, 1.5, 0.5) - 1.0).abs() < 1e-15);
        // symmetric in the offset sign
        let v1 = dynamic_constraint_value(&Point::new(3.0, 0.5), &o, 0.7, 1.2, 0.4);
        let v2 = dynamic_constraint_value(&Point::new(1.0, -2.5), &o, 0.7, 1.2, 0.4);
        assert!((v1 - v2).abs() < 1e-12);
    }

    #[test]
    fn ellipse_value_matches_inverse_rotation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let o = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let p = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let phi: f64 = rng.gen_range(-PI..PI);
            let (alpha, beta) = (rng.gen_range(0.5..3.0), rng.gen_range(0.2..1.5));
            let d = p - o;
            let lx = phi.cos() * d.x + phi.sin() * d.y;
            let ly = -phi.sin() * d.x + phi.cos() * d.y;
            let inside = lx * lx / (alpha * alpha) + ly * ly / (beta * beta) <= 1.0;
            assert_eq!(dynamic_constraint_value(&p, &o, phi, alpha, beta) > 1.0, !inside);
        }
    }

    #[test]
    fn ellipse_distance_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let c = Point::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let phi: f64 = rng.gen_range(-PI..PI);
            let a = rng.gen_range(0.2..2.0);
            let b = rng.gen_range(0.1..2.0);
            let p = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let d = point_ellipse_distance(&p, &c, phi, a, b);
            let q = to_local(&(p - c), phi);
            let sampled = (0..10_000)
                .map(|k| {
                    let t = k as f64 * std::f64::consts::TAU / 10_000.0;
                    (Point::new(a * t.cos(), b * t.sin()) - q).norm()
                })
                .fold(f64::INFINITY, f64::min);
            if (q.x / a).powi(2) + (q.y / b).powi(2) <= 1.0 {
                assert_eq!(d, 0.0);
            } else {
                assert!(d <= sampled + 1e-9, "{d} > {sampled}");
                assert!(sampled - d < 1e-3, "{d} vs {sampled}");
            }
        }
    }

    proptest! {
        #[test]
        fn ellipse_value_rigid_invariance(
            px in -5.0..5.0f64, py in -5.0..5.0f64, ox in -5.0..5.0f64, oy in -5.0..5.0f64,
            phi in -3.0..3.0f64, rot in -3.0..3.0f64, tx in -10.0..10.0f64, ty in -10.0..10.0f64,
        ) {
            let r = crate::geometry::rotation2(rot);
            let t = Point::new(tx, ty);
            let p = Point::new(px, py);
            let o = Point::new(ox, oy);
            let v0 = dynamic_constraint_value(&p, &o, phi, 1.3, 0.6);
            let v1 = dynamic_constraint_value(&(r * p + t), &(r * o + t), phi + rot, 1.3, 0.6);
            prop_assert!((v0 - v1).abs() <= 1e-9 * (1.0 + v0.abs()));
        }

        #[test]
        fn prediction_is_equally_spaced(vx in -2.0..2.0f64, vy in -2.0..2.0f64, tau in 0.1..1.0f64) {
            let s = ObstacleState { position: Point::new(1.0, 2.0), heading: 0.3, velocity: Point::new(vx, vy) };
            let p = predict_from_state(&s, tau, 10);
            for k in 1..=10 {
                let step = p.stages[k].position - p.stages[k - 1].position;
                prop_assert!((step - s.velocity * tau).norm() < 1e-12);
                prop_assert_eq!(p.stages[k].heading, s.heading);
            }
        }
    }
}
