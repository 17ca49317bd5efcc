//! Encounter classification, priority rules and the off-center Gaussian
//! costs that make the planner give way to starboard.

use crate::environment::{ObstacleInfo, VesselClass};
use crate::error::{Error, Result};
use crate::geometry::{rotation2, wrap_angle, Point, Pose};
use serde::{Deserialize, Serialize};

/// Shape and weights of the head-on/overtaking and right-of-way costs.
///
/// With `relative_shifts` set, `c` and `f` and `e` are multiples of the
/// obstacle's semi-major axis and `d` of its semi-minor axis; otherwise they
/// are metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegulationParams {
    pub c: f64,
    pub d: f64,
    pub g: f64,
    pub h: f64,
    pub q_ho: f64,
    pub e: f64,
    pub f: f64,
    pub q_row: f64,
    pub relative_shifts: bool,
    /// Shift the head-on center toward the obstacle's starboard side
    /// (negative body y). Clearing it shifts toward port instead.
    pub d_to_starboard: bool,
    /// Half-width of the head-on sector (rad).
    pub head_on_half_angle: f64,
    /// Bearing beyond which an obstacle counts as abaft the beam (rad).
    pub overtaking_bearing: f64,
}

impl Default for RegulationParams {
    fn default() -> Self {
        Self {
            c: 1.5,
            d: 0.5,
            g: 1.5,
            h: 1.5,
            q_ho: 1.0,
            e: 3.0,
            f: 2.0,
            q_row: 1.0,
            relative_shifts: true,
            d_to_starboard: true,
            head_on_half_angle: 15f64.to_radians(),
            overtaking_bearing: 112.5f64.to_radians(),
        }
    }
}

/// Absolute-valued cost geometry for one obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedShifts {
    pub c: f64,
    /// Signed body-y shift of the head-on center.
    pub d_body_y: f64,
    pub e: f64,
    pub f: f64,
}

impl RegulationParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.g > 0.0
            && self.h > 0.0
            && self.e > 0.0
            && self.q_ho >= 0.0
            && self.q_row >= 0.0
            && [self.c, self.d, self.f].iter().all(|v| v.is_finite())
            && self.head_on_half_angle > 0.0
            && self.overtaking_bearing > self.head_on_half_angle
            && self.overtaking_bearing < std::f64::consts::PI;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid regulation parameters: {self:?}")))
        }
    }

    pub fn resolve(&self, a: f64, b: f64) -> ResolvedShifts {
        let (sa, sb) = if self.relative_shifts { (a, b) } else { (1.0, 1.0) };
        let sign = if self.d_to_starboard { -1.0 } else { 1.0 };
        ResolvedShifts {
            c: self.c * sa,
            d_body_y: sign * self.d * sb,
            e: self.e * sa,
            f: self.f * sa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncounterRegion {
    HeadOn,
    CrossingStarboard,
    CrossingPort,
    Overtaking,
}

/// Bearing of `target` from `observer`, positive to starboard.
pub fn relative_bearing(observer: &Pose, target: &Point) -> f64 {
    let d = target - observer.position;
    -wrap_angle(d.y.atan2(d.x) - observer.heading)
}

pub fn classify_encounter(ego: &Pose, obstacle: &Pose) -> EncounterRegion {
    classify_encounter_with(ego, obstacle, &RegulationParams::default())
}

pub fn classify_encounter_with(ego: &Pose, obstacle: &Pose, params: &RegulationParams) -> EncounterRegion {
    let bearing = relative_bearing(ego, &obstacle.position);
    let (ho, ot) = (params.head_on_half_angle, params.overtaking_bearing);
    if (-ho..ho).contains(&bearing) {
        EncounterRegion::HeadOn
    } else if (ho..ot).contains(&bearing) {
        EncounterRegion::CrossingStarboard
    } else if bearing > -ot && bearing < -ho {
        EncounterRegion::CrossingPort
    } else {
        EncounterRegion::Overtaking
    }
}

/// Whether the ego must give way to the obstacle.
pub fn is_priority(ego: &Pose, obstacle: &ObstacleInfo, obstacle_pose: &Pose) -> bool {
    is_priority_with(ego, obstacle, obstacle_pose, &RegulationParams::default())
}

pub fn is_priority_with(ego: &Pose, obstacle: &ObstacleInfo, obstacle_pose: &Pose, params: &RegulationParams) -> bool {
    let by_class = matches!(
        obstacle.vessel_class,
        VesselClass::Sailboat | VesselClass::MusclePowered | VesselClass::Commercial
    );
    by_class
        || obstacle.length > 20.0
        || (classify_encounter_with(ego, obstacle_pose, params) == EncounterRegion::CrossingStarboard
            && classify_encounter_with(obstacle_pose, ego, params) == EncounterRegion::CrossingPort)
}

/// Head-on cost center: `c` ahead of the obstacle and `d_body_y` along its
/// body y axis.
pub fn ho_ellipse_center(obs_position: &Point, heading: f64, c: f64, d_body_y: f64) -> Point {
    obs_position + rotation2(heading) * Point::new(c, d_body_y)
}

pub fn ho_sigmas(a: f64, b: f64, r_disc: f64, params: &RegulationParams) -> Result<(f64, f64)> {
    let sigma_x = params.g * (a + r_disc);
    let sigma_y = params.h * (b + r_disc);
    if sigma_x > 0.0 && sigma_y > 0.0 {
        Ok((sigma_x, sigma_y))
    } else {
        Err(Error::DegenerateSigma { sigma_x, sigma_y })
    }
}

/// Rotated 2D Gaussian `Q·exp(−(λΔx² + 2μΔxΔy + νΔy²))` and its gradient
/// with respect to `p`.
pub fn gaussian_cost(p: &Point, center: &Point, sigma_x: f64, sigma_y: f64, heading: f64, q: f64) -> (f64, Point) {
    let (s, c) = heading.sin_cos();
    let (ix, iy) = (0.5 / (sigma_x * sigma_x), 0.5 / (sigma_y * sigma_y));
    let lambda = c * c * ix + s * s * iy;
    let mu = s * c * (ix - iy);
    let nu = s * s * ix + c * c * iy;
    let d = p - center;
    let value = q * (-(lambda * d.x * d.x + 2.0 * mu * d.x * d.y + nu * d.y * d.y)).exp();
    let grad = Point::new(lambda * d.x + mu * d.y, mu * d.x + nu * d.y) * (-2.0 * value);
    (value, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegulationMode {
    /// Off-center head-on cost plus right-of-way cost for priority vessels.
    #[default]
    Regulated,
    /// Repulsive Gaussian centered on each obstacle, no right-of-way term.
    Centered,
}

/// One obstacle's pose at a given stage together with its latched priority.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegulationTarget {
    pub position: Point,
    pub heading: f64,
    pub a: f64,
    pub b: f64,
    pub priority: bool,
}

/// Calls `term` with the value and position gradient of every individual
/// Gaussian making up the regulation cost.
pub fn for_each_regulation_term(
    p_ego: &Point,
    targets: &[RegulationTarget],
    params: &RegulationParams,
    r_disc: f64,
    mode: RegulationMode,
    mut term: impl FnMut(f64, Point),
) {
    for t in targets {
        let shifts = params.resolve(t.a, t.b);
        let (sx, sy) = (params.g * (t.a + r_disc), params.h * (t.b + r_disc));
        let center = match mode {
            RegulationMode::Regulated => ho_ellipse_center(&t.position, t.heading, shifts.c, shifts.d_body_y),
            RegulationMode::Centered => t.position,
        };
        let (v, g) = gaussian_cost(p_ego, &center, sx, sy, t.heading, params.q_ho);
        term(v, g);
        if mode == RegulationMode::Regulated && t.priority {
            let center = ho_ellipse_center(&t.position, t.heading, shifts.f, 0.0);
            let (v, g) = gaussian_cost(p_ego, &center, shifts.e, t.b + r_disc, t.heading, params.q_row);
            term(v, g);
        }
    }
}

/// Sum of the regulation costs over all obstacles and its gradient with
/// respect to the ego position.
pub fn regulation_cost(
    p_ego: &Point,
    targets: &[RegulationTarget],
    params: &RegulationParams,
    r_disc: f64,
    mode: RegulationMode,
) -> (f64, Point) {
    let mut total = 0.0;
    let mut grad = Point::zeros();
    for_each_regulation_term(p_ego, targets, params, r_disc, mode, |v, g| {
        total += v;
        grad += g;
    });
    (total, grad)
}
