//! Global reference path: a natural cubic spline through waypoints,
//! reparameterized by arc length θ.

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point};
use serde::{Deserialize, Serialize};

/// 5-point Gauss–Legendre nodes and weights on [−1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Arc-length table resolution per segment.
const SUBDIVISIONS: usize = 24;

/// Cubic `a + b s + c s² + d s³` for one axis of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cubic {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl Cubic {
    fn eval(&self, s: f64) -> f64 {
        self.a + s * (self.b + s * (self.c + s * self.d))
    }

    fn deriv(&self, s: f64) -> f64 {
        self.b + s * (2.0 * self.c + s * 3.0 * self.d)
    }

    fn deriv2(&self, s: f64) -> f64 {
        2.0 * self.c + 6.0 * self.d * s
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Segment {
    x: Cubic,
    y: Cubic,
    /// Parameter span of the segment.
    span: f64,
    /// Arc length at each of the `SUBDIVISIONS + 1` uniform parameter ticks,
    /// measured from the start of the path.
    arc_ticks: Vec<f64>,
}

impl Segment {
    fn point(&self, s: f64) -> Point {
        Point::new(self.x.eval(s), self.y.eval(s))
    }

    fn velocity(&self, s: f64) -> Point {
        Point::new(self.x.deriv(s), self.y.deriv(s))
    }

    fn acceleration(&self, s: f64) -> Point {
        Point::new(self.x.deriv2(s), self.y.deriv2(s))
    }

    fn speed(&self, s: f64) -> f64 {
        self.velocity(s).norm()
    }

    fn arc_between(&self, s0: f64, s1: f64) -> f64 {
        let half = 0.5 * (s1 - s0);
        let mid = 0.5 * (s1 + s0);
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS.iter())
            .map(|(n, w)| w * self.speed(mid + half * n))
            .sum::<f64>()
            * half
    }

    fn tick(&self, i: usize) -> f64 {
        self.span * i as f64 / SUBDIVISIONS as f64
    }

    /// Parameter `s` at which the arc length from the path start equals `theta`.
    fn invert_arc(&self, theta: f64) -> f64 {
        let ticks = &self.arc_ticks;
        let j = match ticks.binary_search_by(|a| a.total_cmp(&theta)) {
            Ok(j) => return self.tick(j),
            Err(j) => j.clamp(1, SUBDIVISIONS) - 1,
        };
        let (lo, hi) = (self.tick(j), self.tick(j + 1));
        let frac = (theta - ticks[j]) / (ticks[j + 1] - ticks[j]);
        let mut s = lo + frac * (hi - lo);
        for _ in 0..6 {
            let residual = ticks[j] + self.arc_between(lo, s) - theta;
            let speed = self.speed(s).max(1e-12);
            let next = (s - residual / speed).clamp(lo, hi);
            let done = (next - s).abs() < 1e-13 * self.span.max(1.0);
            s = next;
            if done {
                break;
            }
        }
        s
    }
}

/// Point on the path together with its tangent heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub point: Point,
    /// Heading of the tangent, in (−π, π].
    pub tangent_heading: f64,
    pub theta: f64,
}

/// Local frame used by the contouring cost: point, unit tangent, signed
/// curvature, and whether `theta` fell outside the path and was clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathFrame {
    pub point: Point,
    pub tangent: Point,
    pub curvature: f64,
    pub clamped: bool,
}

impl PathFrame {
    /// Unit normal pointing to port (left) of the tangent.
    pub fn normal(&self) -> Point {
        Point::new(-self.tangent.y, self.tangent.x)
    }
}

/// Search window for [`ReferencePath::project_progress`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressHint {
    pub theta: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    waypoints: Vec<Point>,
    segments: Vec<Segment>,
    /// Arc length at each waypoint; first entry is zero.
    cumulative_arc: Vec<f64>,
}

impl ReferencePath {
    /// Fits a natural cubic spline through `waypoints` (chord-length knots).
    pub fn new(waypoints: &[Point]) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidPath(format!(
                "need at least 2 waypoints, got {}",
                waypoints.len()
            )));
        }
        if let Some(p) = waypoints.iter().find(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidPath(format!("non-finite waypoint {p:?}")));
        }
        let spans: Vec<f64> = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        if let Some(i) = spans.iter().position(|&h| h < 1e-9) {
            return Err(Error::InvalidPath(format!(
                "waypoints {i} and {} coincide",
                i + 1
            )));
        }

        let xs: Vec<f64> = waypoints.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = waypoints.iter().map(|p| p.y).collect();
        let cx = natural_spline(&xs, &spans);
        let cy = natural_spline(&ys, &spans);

        let mut segments = Vec::with_capacity(spans.len());
        let mut cumulative_arc = vec![0.0];
        for (i, &span) in spans.iter().enumerate() {
            let mut seg = Segment {
                x: cx[i],
                y: cy[i],
                span,
                arc_ticks: Vec::with_capacity(SUBDIVISIONS + 1),
            };
            let mut arc = *cumulative_arc.last().unwrap();
            seg.arc_ticks.push(arc);
            for j in 0..SUBDIVISIONS {
                arc += seg.arc_between(seg.tick(j), seg.tick(j + 1));
                seg.arc_ticks.push(arc);
            }
            cumulative_arc.push(arc);
            segments.push(seg);
        }
        Ok(Self {
            waypoints: waypoints.to_vec(),
            segments,
            cumulative_arc,
        })
    }

    pub fn waypoints(&self) -> &[Point] {
        &self.waypoints
    }

    pub fn cumulative_arc(&self) -> &[f64] {
        &self.cumulative_arc
    }

    pub fn total_length(&self) -> f64 {
        *self.cumulative_arc.last().unwrap()
    }

    pub fn clamp_theta(&self, theta: f64) -> f64 {
        theta.clamp(0.0, self.total_length())
    }

    fn locate(&self, theta: f64) -> (usize, f64) {
        let theta = self.clamp_theta(theta);
        let idx = self
            .cumulative_arc
            .partition_point(|&a| a <= theta)
            .saturating_sub(1)
            .min(self.segments.len() - 1);
        let seg = &self.segments[idx];
        (idx, seg.invert_arc(theta))
    }

    pub fn frame(&self, theta: f64) -> PathFrame {
        let clamped = theta < 0.0 || theta > self.total_length();
        let (idx, s) = self.locate(theta);
        let seg = &self.segments[idx];
        let vel = seg.velocity(s);
        let speed = vel.norm();
        let acc = seg.acceleration(s);
        let curvature = if clamped {
            0.0
        } else {
            (vel.x * acc.y - vel.y * acc.x) / (speed * speed * speed)
        };
        PathFrame {
            point: seg.point(s),
            tangent: vel / speed,
            curvature,
            clamped,
        }
    }

    /// Point and tangent heading at progress `theta` (clamped to the path).
    pub fn sample(&self, theta: f64) -> PathSample {
        let f = self.frame(theta);
        PathSample {
            point: f.point,
            tangent_heading: wrap_angle(f.tangent.y.atan2(f.tangent.x)),
            theta: self.clamp_theta(theta),
        }
    }

    /// Signed `(contour, lag)` errors of `position` against the path linearized
    /// at `theta`. Positive contour error means the position lies to port.
    pub fn contour_lag_error(&self, theta: f64, position: &Point) -> (f64, f64) {
        let f = self.frame(theta);
        let d = position - f.point;
        (f.normal().dot(&d), f.tangent.dot(&d))
    }

    fn distance_sq(&self, theta: f64, position: &Point) -> f64 {
        (self.frame(theta).point - position).norm_squared()
    }

    /// Progress value of the path point closest to `position`. With a hint,
    /// only the window around it is searched.
    pub fn project_progress(&self, position: &Point, hint: Option<ProgressHint>) -> f64 {
        let length = self.total_length();
        let (lo, hi, samples) = match hint {
            Some(h) => (
                self.clamp_theta(h.theta - h.half_width),
                self.clamp_theta(h.theta + h.half_width),
                200,
            ),
            None => (0.0, length, 1000),
        };
        if hi - lo <= 0.0 {
            return lo;
        }
        let step = (hi - lo) / samples as f64;
        let mut best = (f64::INFINITY, lo);
        for i in 0..=samples {
            let theta = lo + step * i as f64;
            let d = self.distance_sq(theta, position);
            if d < best.0 {
                best = (d, theta);
            }
        }
        // golden-section refinement on the bracketing grid cells
        let (mut a, mut b) = ((best.1 - step).max(lo), (best.1 + step).min(hi));
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let (mut fc, mut fd) = (self.distance_sq(c, position), self.distance_sq(d, position));
        for _ in 0..60 {
            if b - a < 1e-10 {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = self.distance_sq(c, position);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = self.distance_sq(d, position);
            }
        }
        0.5 * (a + b)
    }
}

/// Natural cubic spline coefficients for values `ys` at knots separated by
/// `spans`; second derivatives vanish at both ends.
fn natural_spline(ys: &[f64], spans: &[f64]) -> Vec<Cubic> {
    let n = ys.len();
    let mut m = vec![0.0; n];
    if n > 2 {
        // tridiagonal system for interior second derivatives (Thomas algorithm)
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            let (h0, h1) = (spans[i], spans[i + 1]);
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0);
        }
        for i in 1..k {
            let w = spans[i] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
        }
    }
    (0..n - 1)
        .map(|i| {
            let h = spans[i];
            Cubic {
                a: ys[i],
                b: (ys[i + 1] - ys[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0,
                c: m[i] / 2.0,
                d: (m[i + 1] - m[i]) / (6.0 * h),
            }
        })
        .collect()
}
