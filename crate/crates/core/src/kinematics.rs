//! UAV motion on the slot grid: states, per-slot steps, trajectory
//! constraint checks, and greedy waypoint routing around risk cylinders.

use alloc::format;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::scenario::{Constraint, RiskSource, Scenario, Violation};

pub const DEFAULT_ROUTE_MARGIN_M: f64 = 10.0;
const DEFLECT_STEP_RAD: f64 = core::f64::consts::PI / 36.0; // 5 degrees

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavKinState {
    pub x_m: f64,
    pub y_m: f64,
    pub altitude_m: f64,
    /// Measured from due north, clockwise toward east, in [0, 2π).
    pub heading_rad: f64,
    pub speed_mps: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum KinError {
    #[error("speed {0} outside [0, {1}]")]
    SpeedOutOfRange(f64, f64),
    #[error("all headings blocked by risk cylinders")]
    Trapped,
}

pub fn normalize_heading(theta: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut t = theta % two_pi;
    if t < 0.0 {
        t += two_pi;
    }
    t
}

/// Horizontal Euclidean distance (UAVs share a fixed altitude).
pub fn slot_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// One slot step: heading from north, displacement speed·δ·(sin θ, cos θ).
pub fn advance(
    state: &UavKinState,
    heading_rad: f64,
    speed_mps: f64,
    v_max_mps: f64,
    slot_seconds: f64,
) -> Result<UavKinState, KinError> {
    if !(0.0..=v_max_mps + 1e-12).contains(&speed_mps) || !speed_mps.is_finite() {
        return Err(KinError::SpeedOutOfRange(speed_mps, v_max_mps));
    }
    let theta = normalize_heading(heading_rad);
    let step = speed_mps * slot_seconds;
    Ok(UavKinState {
        x_m: state.x_m + step * theta.sin(),
        y_m: state.y_m + step * theta.cos(),
        altitude_m: state.altitude_m,
        heading_rad: theta,
        speed_mps,
    })
}

/// A UAV's slotted path: the start point plus one position per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: (f64, f64),
    pub end_target: (f64, f64),
    pub points: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn distances(&self) -> Vec<f64> {
        let mut prev = self.start;
        self.points
            .iter()
            .map(|&p| {
                let d = slot_distance(prev, p);
                prev = p;
                d
            })
            .collect()
    }

    pub fn total_length(&self) -> f64 {
        self.distances().iter().sum()
    }

    /// Position at slot index i (the point reached at the end of slot i).
    pub fn at(&self, i: usize) -> (f64, f64) {
        self.points[i]
    }
}

/// Flag step-distance, path-length, and pairwise-separation faults for a set
/// of same-grid trajectories.
pub fn check_mobility(trajs: &[Trajectory], scn: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let slots = trajs.first().map(|t| t.points.len()).unwrap_or(0);
    let total = scn.time.total_slots().max(1) as f64;
    let dt = scn.time.slot_seconds;
    for (u, traj) in trajs.iter().enumerate() {
        let spec = &scn.uavs[u];
        let lower = dt * spec.d_min_mps / total;
        let upper = dt * spec.v_max_mps;
        for (i, d) in traj.distances().iter().enumerate() {
            if *d < lower - 1e-9 || *d > upper + 1e-9 {
                out.push(Violation::new(
                    Constraint::StepDistance,
                    &[u as u32, i as u32],
                    format!("UAV {u} slot {i}: step {d:.3} m outside [{lower:.3}, {upper:.3}]"),
                ));
            }
        }
        let len = traj.total_length();
        let per_round = scn.time.slots_per_round as usize;
        if per_round > 0 {
            let mut prev = traj.start;
            let mut round_len = 0.0;
            for (i, &p) in traj.points.iter().enumerate() {
                round_len += slot_distance(prev, p);
                prev = p;
                if (i + 1) % per_round == 0 || i + 1 == traj.points.len() {
                    if round_len > spec.l_max_m + 1e-9 {
                        out.push(Violation::new(
                            Constraint::PathLength,
                            &[u as u32, (i / per_round) as u32],
                            format!("UAV {u} round {}: flew {round_len:.1} m > {:.1}", i / per_round, spec.l_max_m),
                        ));
                    }
                    round_len = 0.0;
                }
            }
        }
        let _ = len;
    }
    for i in 0..trajs.len() {
        for j in i + 1..trajs.len() {
            for s in 0..slots.min(trajs[j].points.len()) {
                let d = slot_distance(trajs[i].at(s), trajs[j].at(s));
                if d < scn.safety_distance_m - 1e-9 {
                    out.push(Violation::new(
                        Constraint::UavSeparation,
                        &[i as u32, j as u32, s as u32],
                        format!("UAVs {i} and {j} are {d:.1} m apart at slot {s}"),
                    ));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct RouteParams {
    pub v_max_mps: f64,
    pub slot_seconds: f64,
    pub margin_m: f64,
    pub detect_segments: u32,
    pub sense_range_m: f64,
}

impl RouteParams {
    pub fn from_scenario(scn: &Scenario, uav: usize) -> Self {
        RouteParams {
            v_max_mps: scn.uavs[uav].v_max_mps,
            slot_seconds: scn.time.slot_seconds,
            margin_m: DEFAULT_ROUTE_MARGIN_M,
            detect_segments: scn.consts.detect_segments,
            sense_range_m: scn.consts.sense_range_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteStep {
    pub heading_rad: f64,
    pub speed_mps: f64,
    /// Midpoint distances to each risk source; empty for out-of-range risks.
    /// Indexed like the risk list that was passed in.
    pub detect_distances_m: Vec<Vec<f64>>,
}

fn segment_blocked(from: (f64, f64), to: (f64, f64), risk: &RiskSource, margin: f64) -> bool {
    let r = risk.radius_m + margin;
    let (cx, cy) = (risk.x_m, risk.y_m);
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 <= 1e-18 {
        0.0
    } else {
        (((cx - from.0) * dx + (cy - from.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let px = from.0 + t * dx;
    let py = from.1 + t * dy;
    (px - cx).powi(2) + (py - cy).powi(2) < r * r
}

fn step_free(from: (f64, f64), heading: f64, dist: f64, risks: &[RiskSource], margin: f64) -> bool {
    let to = (from.0 + dist * heading.sin(), from.1 + dist * heading.cos());
    risks.iter().all(|rk| !segment_blocked(from, to, rk, margin))
}

fn midpoint_detects(
    from: (f64, f64),
    heading: f64,
    dist: f64,
    risks: &[RiskSource],
    params: &RouteParams,
) -> Vec<Vec<f64>> {
    let m = params.detect_segments.max(1);
    risks
        .iter()
        .map(|rk| {
            if slot_distance(from, (rk.x_m, rk.y_m)) > params.sense_range_m {
                return Vec::new();
            }
            (1..=m)
                .map(|k| {
                    let frac = (k as f64 - 0.5) / m as f64;
                    let p = (from.0 + frac * dist * heading.sin(), from.1 + frac * dist * heading.cos());
                    slot_distance(p, (rk.x_m, rk.y_m))
                })
                .collect()
        })
        .collect()
}

/// Greedy slot step toward `target`: straight at min(v_max, dist/δ), with a
/// deterministic angular deflection search around inflated risk cylinders.
pub fn route_toward(
    state: &UavKinState,
    target: (f64, f64),
    risks: &[RiskSource],
    params: &RouteParams,
) -> Result<RouteStep, KinError> {
    let from = (state.x_m, state.y_m);
    let dist_to_target = slot_distance(from, target);
    let finish = |heading: f64, speed: f64| {
        let step = speed * params.slot_seconds;
        RouteStep {
            heading_rad: normalize_heading(heading),
            speed_mps: speed,
            detect_distances_m: midpoint_detects(from, heading, step, risks, params),
        }
    };

    if dist_to_target < 1e-9 {
        return Ok(finish(state.heading_rad, 0.0));
    }
    let direct = normalize_heading((target.0 - from.0).atan2(target.1 - from.1));
    let speed = params.v_max_mps.min(dist_to_target / params.slot_seconds);
    let step_len = speed * params.slot_seconds;

    if step_free(from, direct, step_len, risks, params.margin_m) {
        return Ok(finish(direct, speed));
    }

    // Straight line blocked: if the free prefix is long enough, creep up to
    // the cylinder; otherwise search deflected headings at full speed.
    let mut t_enter = 1.0f64;
    for rk in risks {
        let to = (from.0 + step_len * direct.sin(), from.1 + step_len * direct.cos());
        if segment_blocked(from, to, rk, params.margin_m) {
            // Bisect the entry point along the segment.
            let mut lo = 0.0f64;
            let mut hi = 1.0f64;
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                let p = (from.0 + mid * step_len * direct.sin(), from.1 + mid * step_len * direct.cos());
                if segment_blocked(from, p, rk, params.margin_m) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            t_enter = t_enter.min(lo);
        }
    }
    if t_enter * step_len > 1.0 {
        let creep = speed * (t_enter * 0.95);
        if step_free(from, direct, creep * params.slot_seconds, risks, params.margin_m) {
            return Ok(finish(direct, creep));
        }
    }

    for reduce in [1.0, 0.5, 0.25] {
        let v = speed * reduce;
        let len = v * params.slot_seconds;
        for k in 1..=36 {
            let off = k as f64 * DEFLECT_STEP_RAD;
            for side in [1.0, -1.0] {
                let heading = normalize_heading(direct + side * off);
                if step_free(from, heading, len, risks, params.margin_m) {
                    return Ok(finish(heading, v));
                }
            }
        }
    }
    Err(KinError::Trapped)
}
