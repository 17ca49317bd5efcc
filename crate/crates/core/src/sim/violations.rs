//! Regulation-violation bookkeeping: an obstacle sitting in a forbidden
//! ego-relative rectangle with a given relative heading for longer than the
//! dwell threshold.

use super::trace::SimTrace;
use crate::geometry::{wrap_angle, Pose};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    HeadOn,
    Overtaking,
    Crossing,
}

/// Rectangle in the ego body frame (x forward, y to port) plus the allowed
/// interval of obstacle heading relative to the ego heading. All bounds are
/// inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub kind: ViolationKind,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub heading_center: f64,
    pub heading_half_width: f64,
}

impl RegionSpec {
    pub fn contains(&self, ego: &Pose, obstacle: &Pose) -> bool {
        let p = ego.relative(&obstacle.position);
        let rel = wrap_angle(obstacle.heading - ego.heading);
        (self.x[0]..=self.x[1]).contains(&p.x)
            && (self.y[0]..=self.y[1]).contains(&p.y)
            && wrap_angle(rel - self.heading_center).abs() <= self.heading_half_width
    }

    /// The same region reflected about the ego's longitudinal axis.
    pub fn mirrored(&self) -> Self {
        Self {
            y: [-self.y[1], -self.y[0]],
            heading_center: -self.heading_center,
            ..*self
        }
    }
}

/// Region scale (m): 1.5 hull lengths of the default vessel.
pub const DEFAULT_SCALE: f64 = 1.35;

/// Right-handed regions; left-handed ones are their mirror images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRegionSpec {
    pub regions: Vec<RegionSpec>,
    /// Minimum dwell (s); a run must last strictly longer to count.
    pub dwell: f64,
}

impl ViolationRegionSpec {
    /// Regions scaled by length `l`: an oncoming vessel on the starboard
    /// bow, a vessel being overtaken on the port side, and a vessel crossing
    /// from starboard abeam or astern of the ego.
    pub fn for_scale(l: f64) -> Self {
        Self {
            regions: vec![
                RegionSpec {
                    kind: ViolationKind::HeadOn,
                    x: [0.0, 4.0 * l],
                    y: [-2.0 * l, 0.0],
                    heading_center: PI,
                    heading_half_width: FRAC_PI_4,
                },
                RegionSpec {
                    kind: ViolationKind::Overtaking,
                    x: [-1.5 * l, 1.5 * l],
                    y: [0.0, 2.0 * l],
                    heading_center: 0.0,
                    heading_half_width: FRAC_PI_4,
                },
                RegionSpec {
                    kind: ViolationKind::Crossing,
                    x: [-3.0 * l, l],
                    y: [-3.0 * l, 0.0],
                    heading_center: FRAC_PI_2,
                    heading_half_width: FRAC_PI_4,
                },
            ],
            dwell: 0.17,
        }
    }
}

impl Default for ViolationRegionSpec {
    fn default() -> Self {
        Self::for_scale(DEFAULT_SCALE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViolationCounts {
    pub right: usize,
    pub left: usize,
    pub right_head_on: usize,
    pub right_overtaking: usize,
    pub right_crossing: usize,
}

impl ViolationCounts {
    pub fn total(&self) -> usize {
        self.right + self.left
    }
}

/// Number of runs of `true` lasting strictly longer than `dwell`. A run
/// lasts from its first sample to the next negative sample, or to the last
/// sample plus one period if it never ends.
pub fn count_dwell_events(times: &[f64], flags: &[bool], dwell: f64) -> usize {
    let period = if times.len() >= 2 { times[1] - times[0] } else { 0.0 };
    let mut events = 0;
    let mut start: Option<f64> = None;
    for (&t, &f) in times.iter().zip(flags) {
        match (f, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                if t - s > dwell + 1e-9 {
                    events += 1;
                }
                start = None;
            }
            _ => {}
        }
    }
    if let (Some(s), Some(&last)) = (start, times.last()) {
        if last + period - s > dwell + 1e-9 {
            events += 1;
        }
    }
    events
}

/// Violation events with agent `ego` as the reference vessel, sampled at
/// planner steps.
pub fn detect_violations_for(trace: &SimTrace, ego: usize, spec: &ViolationRegionSpec) -> ViolationCounts {
    let steps: Vec<usize> = trace.planner_steps().collect();
    let times: Vec<f64> = steps.iter().map(|&i| trace.times[i]).collect();
    let egos: Vec<Pose> = steps
        .iter()
        .map(|&i| {
            let s = &trace.agents[ego].states[i];
            Pose::new(s.x, s.y, s.psi)
        })
        .collect();
    let others: Vec<Vec<Pose>> = steps
        .iter()
        .map(|&i| trace.encounters(ego, i).into_iter().map(|e| e.pose).collect())
        .collect();
    let n_others = others.first().map_or(0, Vec::len);
    let mut counts = ViolationCounts::default();
    for region in &spec.regions {
        for (handed, r) in [(true, *region), (false, region.mirrored())] {
            for j in 0..n_others {
                let flags: Vec<bool> = (0..steps.len()).map(|s| r.contains(&egos[s], &others[s][j])).collect();
                let n = count_dwell_events(&times, &flags, spec.dwell);
                if handed {
                    counts.right += n;
                    match r.kind {
                        ViolationKind::HeadOn => counts.right_head_on += n,
                        ViolationKind::Overtaking => counts.right_overtaking += n,
                        ViolationKind::Crossing => counts.right_crossing += n,
                    }
                } else {
                    counts.left += n;
                }
            }
        }
    }
    counts
}

/// Violation events of the first agent against all other vessels.
pub fn detect_violations(trace: &SimTrace, spec: &ViolationRegionSpec) -> ViolationCounts {
    detect_violations_for(trace, 0, spec)
}

/// Per planner step, whether any right- or left-handed region is occupied.
pub fn violation_flags(trace: &SimTrace, spec: &ViolationRegionSpec) -> Vec<(bool, bool)> {
    trace
        .planner_steps()
        .map(|i| {
            let s = &trace.agents[0].states[i];
            let ego = Pose::new(s.x, s.y, s.psi);
            let others = trace.encounters(0, i);
            let hit = |mirror: bool| {
                spec.regions.iter().any(|r| {
                    let r = if mirror { r.mirrored() } else { *r };
                    others.iter().any(|o| r.contains(&ego, &o.pose))
                })
            };
            (hit(false), hit(true))
        })
        .collect()
}

/// Reflects a whole trace about the world x axis.
pub fn mirror_trace(trace: &SimTrace) -> SimTrace {
    let mut out = trace.clone();
    for a in &mut out.agents {
        for s in &mut a.states {
            *s = crate::vessel::VesselState::new(s.x, -s.y, -s.psi, s.u, -s.v, -s.r);
        }
        for c in &mut a.commands {
            // swap port and starboard thrusters' roles: lateral force and
            // yaw moment change sign
            c.forces = [c.forces[1], c.forces[0], -c.forces[2], -c.forces[3]];
        }
    }
    for o in &mut out.obstacles {
        for s in &mut o.states {
            s.position.y = -s.position.y;
            s.heading = wrap_angle(-s.heading);
            s.velocity.y = -s.velocity.y;
        }
    }
    out
}
