//! Scripted plan-view world: a straight ego route, parked vehicles and
//! pedestrians that start walking when the ego comes within range.

use std::f64::consts::{FRAC_PI_2, PI};

use thiserror::Error;

use crate::engine::{Mount, PerceptionUnit};
use crate::geometry::{footprint_distance, Footprint, Pose2, SectorGate, Vec2};
use crate::linalg::Mat2;
use crate::pem::{
    ActorId, ClassTag, ConditionRule, DetectionModel, EgoState, ErrorModel, GaussianError,
    GroundTruthObject, Pem, WorldState,
};

/// Upper bound on scripted pedestrian speed (m/s).
pub const MAX_PEDESTRIAN_SPEED: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActorKind {
    Pedestrian,
    ParkedVehicle,
}

impl ActorKind {
    pub fn class_tag(self) -> ClassTag {
        match self {
            ActorKind::Pedestrian => ClassTag::Pedestrian,
            ActorKind::ParkedVehicle => ClassTag::StaticObstacle,
        }
    }
}

/// Non-ego actor. `speed`/`heading` give its initial motion.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub id: ActorId,
    pub kind: ActorKind,
    pub footprint: Footprint,
    pub speed: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TriggerCondition {
    /// Fires once the ego–actor footprint gap is at most this many meters.
    EgoWithinRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TriggerAction {
    StartWalking { speed: f64, direction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trigger {
    pub actor: ActorId,
    pub condition: TriggerCondition,
    pub action: TriggerAction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoRoute {
    pub start: Pose2,
    pub destination: Vec2,
    pub cruise_speed: f64,
    pub initial_speed: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl EgoRoute {
    fn direction(&self) -> Vec2 {
        Vec2::from_heading(self.start.heading())
    }

    /// The route is straight, so the destination must lie ahead on the start
    /// heading and be reachable at cruise speed before `timeout`.
    pub fn check_reachable(&self, timeout: f64) -> Result<(), String> {
        let along = self.length();
        let off = (self.destination - self.start.position)
            .cross(self.direction())
            .abs();
        if !(along > 0.0) || off > 1e-6 {
            return Err(format!(
                "destination is not reachable along the start heading (ahead {along:.3} m, off-route {off:.3} m)"
            ));
        }
        if along / self.cruise_speed > timeout {
            return Err(format!(
                "destination {along:.3} m ahead is not reachable at {} m/s within the {timeout} s timeout",
                self.cruise_speed
            ));
        }
        Ok(())
    }

    /// Signed distance of the destination along the route.
    pub fn length(&self) -> f64 {
        (self.destination - self.start.position).dot(self.direction())
    }
}

/// Perception hardware available in a scenario: the ego's onboard PEM and
/// any external units (unit ids from 1).
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionSetup {
    pub onboard: Pem,
    pub external: Vec<PerceptionUnit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub actors: Vec<Actor>,
    pub triggers: Vec<Trigger>,
    pub ego: EgoRoute,
    pub dt: f64,
    pub timeout: f64,
    pub perception: PerceptionSetup,
}

/// World snapshot plus which triggers have already fired.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub world: WorldState,
    pub fired: Vec<bool>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.dt > 0.0 && self.dt <= 0.5) {
            return bad(format!("dt {} outside (0, 0.5]", self.dt));
        }
        if !(self.timeout > 0.0) {
            return bad(format!("timeout {} must be positive", self.timeout));
        }
        let e = &self.ego;
        if !(e.half_length > 0.0 && e.half_width > 0.0) {
            return bad("ego extents must be positive".into());
        }
        if !(e.cruise_speed > 0.0) || !(e.initial_speed >= 0.0) {
            return bad("ego speeds must be non-negative, cruise speed positive".into());
        }
        e.check_reachable(self.timeout)
            .map_err(ScenarioError::Invalid)?;
        let mut ids = std::collections::HashSet::new();
        for a in &self.actors {
            if !ids.insert(a.id) {
                return bad(format!("duplicate actor id {}", a.id));
            }
            a.footprint
                .validate()
                .map_err(|err| ScenarioError::Invalid(format!("actor {}: {err}", a.id)))?;
            match a.kind {
                ActorKind::ParkedVehicle if a.speed != 0.0 => {
                    return bad(format!("parked vehicle {} must have speed 0", a.id))
                }
                ActorKind::Pedestrian if !(0.0..=MAX_PEDESTRIAN_SPEED).contains(&a.speed) => {
                    return bad(format!(
                        "pedestrian {} speed {} outside [0, 3]",
                        a.id, a.speed
                    ))
                }
                _ => {}
            }
        }
        for t in &self.triggers {
            let Some(actor) = self.actors.iter().find(|a| a.id == t.actor) else {
                return bad(format!("trigger references unknown actor {}", t.actor));
            };
            let TriggerCondition::EgoWithinRange(r) = t.condition;
            if !(r > 0.0) {
                return bad(format!("trigger range {r} must be positive"));
            }
            let TriggerAction::StartWalking { speed, .. } = t.action;
            if actor.kind != ActorKind::Pedestrian || !(0.0..=MAX_PEDESTRIAN_SPEED).contains(&speed)
            {
                return bad(format!(
                    "start_walking on actor {} needs a pedestrian and speed in [0, 3]",
                    t.actor
                ));
            }
        }
        for u in &self.perception.external {
            if u.unit_id == 0 {
                return bad("unit id 0 is reserved for the ego".into());
            }
            if let Mount::Actor(id) = u.mount {
                if !ids.contains(&id) {
                    return bad(format!("unit {} mounted on unknown actor {id}", u.unit_id));
                }
            }
        }
        let mut unit_ids = std::collections::HashSet::new();
        if !self
            .perception
            .external
            .iter()
            .all(|u| unit_ids.insert(u.unit_id))
        {
            return bad("duplicate external unit id".into());
        }
        Ok(())
    }

    pub fn initial_state(&self) -> SimState {
        let ego = EgoState {
            footprint: Footprint {
                center: self.ego.start.position,
                half_length: self.ego.half_length,
                half_width: self.ego.half_width,
                heading: self.ego.start.heading(),
            },
            speed: self.ego.initial_speed,
        };
        SimState {
            world: WorldState {
                time: 0.0,
                step: 0,
                objects: self
                    .actors
                    .iter()
                    .map(|a| GroundTruthObject {
                        id: a.id,
                        footprint: a.footprint,
                        velocity: Vec2::from_heading(a.heading) * a.speed,
                        class_tag: a.kind.class_tag(),
                    })
                    .collect(),
                ego,
            },
            fired: vec![false; self.triggers.len()],
        }
    }

    /// Distance travelled by the ego along its route.
    pub fn progress(&self, world: &WorldState) -> f64 {
        (world.ego.footprint.center - self.ego.start.position).dot(self.ego.direction())
    }

    pub fn destination_reached(&self, world: &WorldState) -> bool {
        self.progress(world) >= self.ego.length()
    }

    pub fn max_steps(&self) -> u64 {
        (self.timeout / self.dt).ceil() as u64
    }
}

/// Ego travel and end speed over one step of constant acceleration,
/// stopping (never reversing) if the speed would go negative.
pub fn integrate_speed(speed: f64, accel: f64, dt: f64) -> (f64, f64) {
    let end = speed + accel * dt;
    if end < 0.0 {
        (speed * speed / (-2.0 * accel), 0.0)
    } else {
        (speed * dt + 0.5 * accel * dt * dt, end)
    }
}

/// Advances the world by one `dt`: ego first, then moving actors, then
/// triggers are checked against the new positions.
pub fn step_world(scenario: &Scenario, state: &SimState, ego_accel: f64) -> SimState {
    let mut next = state.clone();
    let w = &mut next.world;

    let (travel, speed) = integrate_speed(w.ego.speed, ego_accel, scenario.dt);
    w.ego.speed = speed;
    w.ego.footprint.center += scenario.ego.direction() * travel;

    for obj in &mut w.objects {
        if obj.velocity != Vec2::ZERO {
            obj.footprint.center += obj.velocity * scenario.dt;
        }
    }

    for (i, trig) in scenario.triggers.iter().enumerate() {
        if next.fired[i] {
            continue;
        }
        let Some(obj) = w.objects.iter_mut().find(|o| o.id == trig.actor) else {
            continue;
        };
        let TriggerCondition::EgoWithinRange(r) = trig.condition;
        if footprint_distance(&w.ego.footprint, &obj.footprint) <= r {
            let TriggerAction::StartWalking { speed, direction } = trig.action;
            obj.velocity = Vec2::from_heading(direction) * speed;
            obj.footprint.heading = direction;
            next.fired[i] = true;
        }
    }

    w.step += 1;
    w.time = w.step as f64 * scenario.dt;
    next
}

/// Smallest footprint gap between the ego and any other actor.
pub fn min_actor_distance(world: &WorldState) -> f64 {
    world
        .objects
        .iter()
        .map(|o| footprint_distance(&world.ego.footprint, &o.footprint))
        .fold(f64::INFINITY, f64::min)
}

/// Id of the pedestrian in [`default_scenario`].
pub const DEFAULT_PEDESTRIAN: ActorId = ActorId(1);
/// Id of the parked truck in [`default_scenario`].
pub const DEFAULT_TRUCK: ActorId = ActorId(2);
/// Longitudinal position of the pedestrian's crossing in [`default_scenario`].
pub const DEFAULT_CROSSING_X: f64 = 80.0;

/// Ego onboard PEM: detection equals visible fraction, position error
/// N(0, 1 m² · I) in world coordinates.
pub fn default_onboard_pem() -> Pem {
    Pem::new(vec![ConditionRule {
        gate: SectorGate::new(PI, 0.0, 100.0).expect("valid gate"),
        detection: DetectionModel::VisibilityProportional,
        error: ErrorModel::Gaussian(GaussianError::isotropic(1.0).expect("SPD")),
    }])
    .expect("non-empty")
}

/// Roadside PEM: occlusion-driven detection with centimetre-level error up
/// to 20 m, unreliable detection beyond.
pub fn default_roadside_pem() -> Pem {
    let fov = PI / 3.0;
    Pem::new(vec![
        ConditionRule {
            gate: SectorGate::new(fov, 0.0, 20.0).expect("valid gate"),
            detection: DetectionModel::VisibilityProportional,
            error: ErrorModel::Gaussian(
                GaussianError::new(Vec2::ZERO, Mat2::diag(0.0025, 0.0025)).expect("SPD"),
            ),
        },
        ConditionRule {
            gate: SectorGate::new(fov, 20.0, 60.0).expect("valid gate"),
            detection: DetectionModel::FixedRate(DEFAULT_ROADSIDE_FAR_RATE),
            error: ErrorModel::Gaussian(
                GaussianError::new(Vec2::ZERO, Mat2::diag(0.01, 0.01)).expect("SPD"),
            ),
        },
    ])
    .expect("non-empty")
}

/// Per-frame detection probability of a roadside unit beyond 20 m.
pub const DEFAULT_ROADSIDE_FAR_RATE: f64 = 0.04;

/// Twenty roadside units on poles 6 m either side of the road, 22–40 m
/// past the crossing, looking back at it.
pub fn default_roadside_units() -> Vec<PerceptionUnit> {
    (0..20)
        .map(|i| {
            let side = if i % 2 == 0 { 6.0 } else { -6.0 };
            let x = DEFAULT_CROSSING_X + 22.0 + 2.0 * (i / 2) as f64;
            PerceptionUnit {
                unit_id: i + 1,
                mount: Mount::Static(Pose2::new(Vec2::new(x, side), PI)),
                pem: default_roadside_pem(),
            }
        })
        .collect()
}

/// Occluded pedestrian crossing.
///
/// The ego drives east along `y = 0` at 10 m/s. A pedestrian waits 2.6 m to
/// the right of the lane centre, just past the front of a truck parked on
/// the shoulder, which hides it from the ego. When the ego–pedestrian gap
/// drops to 20 m the pedestrian crosses northwards at 1 m/s, reaching the
/// ego's path about 2 s later.
pub fn default_scenario() -> Scenario {
    let x = DEFAULT_CROSSING_X;
    let pedestrian = Actor {
        id: DEFAULT_PEDESTRIAN,
        kind: ActorKind::Pedestrian,
        footprint: Footprint {
            center: Vec2::new(x, -2.6),
            half_length: 0.25,
            half_width: 0.25,
            heading: FRAC_PI_2,
        },
        speed: 0.0,
        heading: FRAC_PI_2,
    };
    let truck = Actor {
        id: DEFAULT_TRUCK,
        kind: ActorKind::ParkedVehicle,
        footprint: Footprint {
            center: Vec2::new(x - 5.5, -2.6),
            half_length: 5.0,
            half_width: 1.1,
            heading: 0.0,
        },
        speed: 0.0,
        heading: 0.0,
    };
    Scenario {
        actors: vec![pedestrian, truck],
        triggers: vec![Trigger {
            actor: DEFAULT_PEDESTRIAN,
            condition: TriggerCondition::EgoWithinRange(20.0),
            action: TriggerAction::StartWalking {
                speed: 1.0,
                direction: FRAC_PI_2,
            },
        }],
        ego: EgoRoute {
            start: Pose2::new(Vec2::ZERO, 0.0),
            destination: Vec2::new(x + 60.0, 0.0),
            cruise_speed: 10.0,
            initial_speed: 10.0,
            half_length: 2.3,
            half_width: 0.9,
        },
        dt: 0.1,
        timeout: 60.0,
        perception: PerceptionSetup {
            onboard: default_onboard_pem(),
            external: default_roadside_units(),
        },
    }
}
