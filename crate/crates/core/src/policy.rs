//! Brake-only surrogate driving policy.
//!
//! Cruise control toward a target speed, plus a corridor check on the
//! perceived object list: any road user whose constant-velocity
//! extrapolation enters the ego's lane strip ahead within the threat
//! horizon triggers full braking. The policy only ever sees perceived
//! objects.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose2;
use crate::pem::{ActorId, ClassTag, EgoState, PerceivedObject};

/// Look-ahead kept even at standstill (m).
pub const STANDSTILL_LOOKAHEAD: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid policy parameters: {0}")]
pub struct PolicyError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyParams {
    pub target_speed: f64,
    pub max_decel: f64,
    pub max_accel: f64,
    pub corridor_half_width: f64,
    pub threat_horizon: f64,
    pub confirm_latch: bool,
    /// Proportional gain of the cruise controller (1/s).
    pub speed_gain: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            target_speed: 10.0,
            max_decel: 6.0,
            max_accel: 2.0,
            corridor_half_width: 1.5,
            threat_horizon: 3.0,
            confirm_latch: true,
            speed_gain: 1.0,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self, ego_half_width: f64) -> Result<(), PolicyError> {
        let positive = [
            ("target_speed", self.target_speed),
            ("max_decel", self.max_decel),
            ("max_accel", self.max_accel),
            ("corridor_half_width", self.corridor_half_width),
            ("threat_horizon", self.threat_horizon),
            ("speed_gain", self.speed_gain),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(PolicyError(format!("{name} must be positive, got {v}")));
            }
        }
        if self.corridor_half_width < ego_half_width {
            return Err(PolicyError(format!(
                "corridor half width {} is narrower than the ego ({ego_half_width})",
                self.corridor_half_width
            )));
        }
        Ok(())
    }

    pub fn stopping_distance(&self, speed: f64) -> f64 {
        speed * speed / (2.0 * self.max_decel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Cruising,
    Braking,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreatEvent {
    pub time: f64,
    pub object: ActorId,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolicyState {
    pub mode: Mode,
    /// First threat of the run.
    pub threat_detected_at: Option<ThreatEvent>,
}

/// Intersection of two closed intervals, if non-empty.
fn overlap(a: (f64, f64), b: (f64, f64)) -> Option<(f64, f64)> {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    (lo <= hi).then_some((lo, hi))
}

/// Times in `[0, horizon]` at which `p + v·τ` lies in `[lo, hi]`.
fn window(p: f64, v: f64, lo: f64, hi: f64, horizon: f64) -> Option<(f64, f64)> {
    if v == 0.0 {
        return (lo..=hi).contains(&p).then_some((0.0, horizon));
    }
    let (a, b) = ((lo - p) / v, (hi - p) / v);
    overlap((a.min(b), a.max(b)), (0.0, horizon))
}

pub fn is_threat(
    obj: &PerceivedObject,
    ego_pose: &Pose2,
    ego_speed: f64,
    params: &PolicyParams,
) -> bool {
    if obj.class_tag == ClassTag::StaticObstacle {
        return false;
    }
    let p = ego_pose.to_local(obj.position);
    let v = obj.velocity.rotate(-ego_pose.heading());
    let reach = STANDSTILL_LOOKAHEAD
        + ego_speed * params.threat_horizon
        + params.stopping_distance(ego_speed);
    let w = params.corridor_half_width;
    let Some(lateral) = window(p.y, v.y, -w, w, params.threat_horizon) else {
        return false;
    };
    let Some(ahead) = window(p.x, v.x, 0.0, reach, params.threat_horizon) else {
        return false;
    };
    overlap(lateral, ahead).is_some()
}

/// One control step. Returns the acceleration command and the new state.
///
/// With `confirm_latch`, braking is held through frames where the threat
/// drops out of the perceived list and is only released once the ego has
/// come to a standstill with nothing threatening in view.
pub fn decide(
    perceived: &[PerceivedObject],
    ego: &EgoState,
    time: f64,
    state: PolicyState,
    params: &PolicyParams,
) -> (f64, PolicyState) {
    let pose = ego.pose();
    let threat = perceived
        .iter()
        .find(|o| is_threat(o, &pose, ego.speed, params));
    let mut next = state;
    next.mode = match (threat, state.mode) {
        (Some(_), _) => Mode::Braking,
        (None, Mode::Braking) if params.confirm_latch && ego.speed > 0.0 => Mode::Braking,
        (None, _) => Mode::Cruising,
    };
    if let (Some(obj), None) = (threat, state.threat_detected_at) {
        next.threat_detected_at = Some(ThreatEvent {
            time,
            object: obj.source_id,
        });
    }
    let accel = match next.mode {
        Mode::Braking => -params.max_decel,
        Mode::Cruising => (params.speed_gain * (params.target_speed - ego.speed))
            .clamp(-params.max_decel, params.max_accel),
    };
    (accel, next)
}
