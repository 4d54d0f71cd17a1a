//! Cooperative PEM: posed perception units, a fusion model, and a world
//! history buffer that injects one consolidated latency.

use std::collections::{HashSet, VecDeque};

use thiserror::Error;

use crate::fusion::{ideal_fuse, FusionError, UnitDetections};
use crate::geometry::{GeometryError, Pose2};
use crate::pem::{apply_pem, observe, ActorId, Carrier, Pem, PerceivedObject, WorldState};
use crate::rng::FrameStreams;

/// Slack for comparing buffered timestamps, which are multiples of `dt`.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("unit is mounted on actor {0}, which is not in the world")]
    MissingActor(ActorId),
    #[error("world buffer is empty")]
    EmptyBuffer,
    #[error("buffer times must increase: {newest} then {pushed}")]
    NonMonotonicTime { newest: f64, pushed: f64 },
    #[error("requested time {requested} is not the newest buffered time {newest}")]
    StaleQuery { requested: f64, newest: f64 },
    #[error("invalid coPEM: {0}")]
    InvalidCoPem(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mount {
    Static(Pose2),
    Ego,
    Actor(ActorId),
}

impl Mount {
    fn carrier(&self) -> Carrier {
        match self {
            Mount::Static(_) => Carrier::Fixed,
            Mount::Ego => Carrier::Ego,
            Mount::Actor(id) => Carrier::Actor(*id),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionUnit {
    pub unit_id: usize,
    pub mount: Mount,
    pub pem: Pem,
}

/// Cross-unit fusion strategy. Only the ideal model ships.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionModel {
    #[default]
    Ideal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoPem {
    units: Vec<PerceptionUnit>,
    latency: f64,
    fusion: FusionModel,
}

impl CoPem {
    pub fn new(units: Vec<PerceptionUnit>, latency: f64) -> Result<Self, EngineError> {
        if !(latency >= 0.0) || !latency.is_finite() {
            return Err(EngineError::InvalidCoPem(format!(
                "latency {latency} must be >= 0"
            )));
        }
        let Some(first) = units.first() else {
            return Err(EngineError::InvalidCoPem("no perception units".into()));
        };
        if first.unit_id != 0 || first.mount != Mount::Ego {
            return Err(EngineError::InvalidCoPem(
                "unit 0 must be the ego's onboard unit".into(),
            ));
        }
        let mut seen = HashSet::new();
        for u in &units {
            if !seen.insert(u.unit_id) {
                return Err(EngineError::InvalidCoPem(format!(
                    "duplicate unit id {}",
                    u.unit_id
                )));
            }
            if let Mount::Static(p) = u.mount {
                if !p.position.is_finite() {
                    return Err(EngineError::InvalidCoPem(format!(
                        "unit {} has a non-finite pose",
                        u.unit_id
                    )));
                }
            }
        }
        Ok(Self {
            units,
            latency,
            fusion: FusionModel::Ideal,
        })
    }

    /// The ego's onboard PEM on its own, without delay.
    pub fn onboard_only(pem: Pem) -> Self {
        Self::new(
            vec![PerceptionUnit {
                unit_id: 0,
                mount: Mount::Ego,
                pem,
            }],
            0.0,
        )
        .expect("single ego unit is valid")
    }

    pub fn units(&self) -> &[PerceptionUnit] {
        &self.units
    }

    pub fn latency(&self) -> f64 {
        self.latency
    }

    pub fn fusion(&self) -> FusionModel {
        self.fusion
    }

    pub fn with_latency(mut self, latency: f64) -> Result<Self, EngineError> {
        if !(latency >= 0.0) || !latency.is_finite() {
            return Err(EngineError::InvalidCoPem(format!(
                "latency {latency} must be >= 0"
            )));
        }
        self.latency = latency;
        Ok(self)
    }
}

/// Number of buffered states needed to look `latency` back at step `dt`.
pub fn required_capacity(latency: f64, dt: f64) -> usize {
    (latency / dt - TIME_EPS).ceil().max(0.0) as usize + 1
}

/// Bounded history of world states, oldest first.
#[derive(Debug, Clone)]
pub struct WorldBuffer {
    states: VecDeque<WorldState>,
    capacity: usize,
}

impl WorldBuffer {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            states: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    /// Buffer deep enough for `latency` at step `dt`, plus one spare slot.
    pub fn for_latency(latency: f64, dt: f64) -> Self {
        Self::new(required_capacity(latency, dt) + 1)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn newest(&self) -> Option<&WorldState> {
        self.states.back()
    }

    pub fn push(&mut self, state: WorldState) -> Result<(), EngineError> {
        if let Some(newest) = self.states.back() {
            if state.time <= newest.time {
                return Err(EngineError::NonMonotonicTime {
                    newest: newest.time,
                    pushed: state.time,
                });
            }
        }
        if self.states.len() == self.capacity {
            self.states.pop_front();
        }
        self.states.push_back(state);
        Ok(())
    }
}

/// The buffered state `latency` seconds before `t`; the oldest state if
/// the buffer does not reach back that far.
pub fn delayed_state(
    buffer: &WorldBuffer,
    t: f64,
    latency: f64,
) -> Result<&WorldState, EngineError> {
    let newest = buffer.newest().ok_or(EngineError::EmptyBuffer)?;
    if (newest.time - t).abs() > TIME_EPS {
        return Err(EngineError::StaleQuery {
            requested: t,
            newest: newest.time,
        });
    }
    let target = t - latency + TIME_EPS;
    Ok(buffer
        .states
        .iter()
        .rev()
        .find(|s| s.time <= target)
        .unwrap_or_else(|| buffer.states.front().expect("non-empty")))
}

pub fn resolve_pose(unit: &PerceptionUnit, world: &WorldState) -> Result<Pose2, EngineError> {
    match unit.mount {
        Mount::Static(p) => Ok(p),
        Mount::Ego => Ok(world.ego.pose()),
        Mount::Actor(id) => world
            .object(id)
            .map(|o| Pose2::new(o.footprint.center, o.footprint.heading))
            .ok_or(EngineError::MissingActor(id)),
    }
}

/// Runs every unit against the delayed world and fuses the detections.
pub fn perceive(
    copem: &CoPem,
    buffer: &WorldBuffer,
    t: f64,
    streams: &FrameStreams,
) -> Result<Vec<PerceivedObject>, EngineError> {
    let world = delayed_state(buffer, t, copem.latency)?;
    let per_unit = unit_detections(copem, world, streams)?;
    match copem.fusion {
        FusionModel::Ideal => Ok(ideal_fuse(&per_unit, world, streams)?),
    }
}

fn unit_detections(
    copem: &CoPem,
    world: &WorldState,
    streams: &FrameStreams,
) -> Result<Vec<UnitDetections>, EngineError> {
    copem
        .units
        .iter()
        .map(|unit| {
            let pose = resolve_pose(unit, world)?;
            let found = observe(
                &unit.pem,
                unit.unit_id,
                &pose,
                unit.mount.carrier(),
                world,
                streams,
            )?;
            Ok((unit.unit_id, found))
        })
        .collect()
}

/// Anything that turns a world history into a perceived object list.
pub trait Perception: Send + Sync {
    /// Latency applied to the buffered history (zero if none).
    fn latency(&self) -> f64 {
        0.0
    }

    fn perceive(
        &self,
        buffer: &WorldBuffer,
        t: f64,
        streams: &FrameStreams,
    ) -> Result<Vec<PerceivedObject>, EngineError>;
}

impl Perception for CoPem {
    fn latency(&self) -> f64 {
        self.latency
    }

    fn perceive(
        &self,
        buffer: &WorldBuffer,
        t: f64,
        streams: &FrameStreams,
    ) -> Result<Vec<PerceivedObject>, EngineError> {
        perceive(self, buffer, t, streams)
    }
}

/// Bare onboard PEM applied to the current state.
#[derive(Debug, Clone, PartialEq)]
pub struct OnboardPem(pub Pem);

impl Perception for OnboardPem {
    fn perceive(
        &self,
        buffer: &WorldBuffer,
        t: f64,
        streams: &FrameStreams,
    ) -> Result<Vec<PerceivedObject>, EngineError> {
        let world = delayed_state(buffer, t, 0.0)?;
        Ok(apply_pem(
            &self.0,
            &world.ego.pose(),
            Carrier::Ego,
            world,
            streams,
        )?)
    }
}

/// Error-free, occlusion-free, undelayed perception.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroundTruth;

impl Perception for GroundTruth {
    fn perceive(
        &self,
        buffer: &WorldBuffer,
        t: f64,
        _streams: &FrameStreams,
    ) -> Result<Vec<PerceivedObject>, EngineError> {
        let world = delayed_state(buffer, t, 0.0)?;
        Ok(world
            .objects
            .iter()
            .map(|o| PerceivedObject {
                source_id: o.id,
                position: o.footprint.center,
                velocity: o.velocity,
                class_tag: o.class_tag,
            })
            .collect())
    }
}
