//! Single-unit perception error model.
//!
//! A [`Pem`] is an ordered list of condition rules. For each ground-truth
//! object the first rule whose sector gate admits the object's center is
//! selected; its detection model decides whether the object makes it into
//! the perceived list, and its error model perturbs the reported position.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    in_sector, visible_fraction, Footprint, GeometryError, Pose2, SectorGate, Vec2,
    DEFAULT_VISIBILITY_SAMPLES, MIN_VISIBILITY_SAMPLES,
};
use crate::linalg::Mat2;
use crate::rng::FrameStreams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PemError {
    #[error("a PEM needs at least one rule")]
    NoRules,
    #[error("non-positive-definite covariance {0:?}")]
    NotPositiveDefinite(Mat2),
    #[error("detection rate {0} outside [0, 1]")]
    InvalidRate(f64),
    #[error("non-finite error mean")]
    NonFiniteMean,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActorId(pub u64);

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassTag {
    Pedestrian,
    Vehicle,
    StaticObstacle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    pub id: ActorId,
    pub footprint: Footprint,
    pub velocity: Vec2,
    pub class_tag: ClassTag,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoState {
    pub footprint: Footprint,
    pub speed: f64,
}

impl EgoState {
    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.footprint.center, self.footprint.heading)
    }
}

/// Snapshot of the true world at one instant. The ego is kept apart from
/// `objects`: it is the consumer of perception, never a perceived target.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub time: f64,
    pub step: u64,
    pub objects: Vec<GroundTruthObject>,
    pub ego: EgoState,
}

impl WorldState {
    pub fn object(&self, id: ActorId) -> Option<&GroundTruthObject> {
        self.objects.iter().find(|o| o.id == id)
    }
}

/// Gaussian position error in world coordinates (m, m²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianError {
    mean: Vec2,
    covariance: Mat2,
    factor: Mat2,
}

impl GaussianError {
    pub fn new(mean: Vec2, covariance: Mat2) -> Result<Self, PemError> {
        if !mean.is_finite() {
            return Err(PemError::NonFiniteMean);
        }
        if !covariance.is_finite() || !covariance.is_positive_definite() {
            return Err(PemError::NotPositiveDefinite(covariance));
        }
        let covariance = covariance.symmetrized();
        let factor = covariance
            .cholesky()
            .ok_or(PemError::NotPositiveDefinite(covariance))?;
        Ok(Self {
            mean,
            covariance,
            factor,
        })
    }

    /// Zero-mean error with covariance `variance · I`.
    pub fn isotropic(variance: f64) -> Result<Self, PemError> {
        Self::new(Vec2::ZERO, Mat2::diag(variance, variance))
    }

    pub fn mean(&self) -> Vec2 {
        self.mean
    }

    pub fn covariance(&self) -> Mat2 {
        self.covariance
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        let z = Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        self.mean + self.factor.mul_vec(z)
    }
}

/// Parameter-error distribution of a rule. `Exact` is the zero-covariance
/// limit: the error is always `offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorModel {
    Gaussian(GaussianError),
    Exact { offset: Vec2 },
}

impl ErrorModel {
    pub const NONE: ErrorModel = ErrorModel::Exact { offset: Vec2::ZERO };

    pub fn mean(&self) -> Vec2 {
        match self {
            ErrorModel::Gaussian(g) => g.mean(),
            ErrorModel::Exact { offset } => *offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectionModel {
    Always,
    Never,
    FixedRate(f64),
    /// Detection probability equals the visible fraction of the target.
    VisibilityProportional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionRule {
    pub gate: SectorGate,
    pub detection: DetectionModel,
    pub error: ErrorModel,
}

impl ConditionRule {
    pub fn new(
        gate: SectorGate,
        detection: DetectionModel,
        error: ErrorModel,
    ) -> Result<Self, PemError> {
        gate.validate()?;
        if let DetectionModel::FixedRate(q) = detection {
            if !(0.0..=1.0).contains(&q) {
                return Err(PemError::InvalidRate(q));
            }
        }
        Ok(Self {
            gate,
            detection,
            error,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pem {
    rules: Vec<ConditionRule>,
    visibility_samples: usize,
}

impl Pem {
    pub fn new(rules: Vec<ConditionRule>) -> Result<Self, PemError> {
        Self::with_samples(rules, DEFAULT_VISIBILITY_SAMPLES)
    }

    pub fn with_samples(rules: Vec<ConditionRule>, samples: usize) -> Result<Self, PemError> {
        if rules.is_empty() {
            return Err(PemError::NoRules);
        }
        if samples < MIN_VISIBILITY_SAMPLES {
            return Err(GeometryError::TooFewSamples(samples).into());
        }
        Ok(Self {
            rules,
            visibility_samples: samples,
        })
    }

    /// Sees everything within `range`, reports it exactly.
    pub fn identity(range: f64) -> Self {
        Self::new(vec![ConditionRule {
            gate: SectorGate::full_circle(range),
            detection: DetectionModel::Always,
            error: ErrorModel::NONE,
        }])
        .expect("one rule")
    }

    pub fn rules(&self) -> &[ConditionRule] {
        &self.rules
    }

    pub fn visibility_samples(&self) -> usize {
        self.visibility_samples
    }
}

/// Object observed by some unit, before the error draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceivedObject {
    /// Ground-truth identity, kept for bookkeeping and metrics only.
    pub source_id: ActorId,
    pub position: Vec2,
    pub velocity: Vec2,
    pub class_tag: ClassTag,
}

/// What physically carries a perception unit; its own body never occludes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Carrier {
    Fixed,
    Ego,
    Actor(ActorId),
}

pub fn select_condition<'a>(
    pem: &'a Pem,
    unit_pose: &Pose2,
    obj: &GroundTruthObject,
) -> Option<&'a ConditionRule> {
    pem.rules
        .iter()
        .find(|r| in_sector(unit_pose, obj.footprint.center, &r.gate))
}

/// Footprints that can hide `target` from a unit on `carrier`.
pub fn occluders_for(world: &WorldState, target: ActorId, carrier: Carrier) -> Vec<Footprint> {
    let mut out: Vec<Footprint> = world
        .objects
        .iter()
        .filter(|o| o.id != target && carrier != Carrier::Actor(o.id))
        .map(|o| o.footprint)
        .collect();
    if carrier != Carrier::Ego {
        out.push(world.ego.footprint);
    }
    out
}

pub fn detect<R: Rng + ?Sized>(
    rule: &ConditionRule,
    unit_pose: &Pose2,
    obj: &GroundTruthObject,
    occluders: &[Footprint],
    samples: usize,
    rng: &mut R,
) -> Result<bool, GeometryError> {
    Ok(match rule.detection {
        DetectionModel::Always => true,
        DetectionModel::Never => false,
        DetectionModel::FixedRate(q) => rng.random::<f64>() < q,
        DetectionModel::VisibilityProportional => {
            let f = visible_fraction(unit_pose, &obj.footprint, occluders, samples)?;
            rng.random::<f64>() < f
        }
    })
}

pub fn sample_error<R: Rng + ?Sized>(rule: &ConditionRule, rng: &mut R) -> Vec2 {
    match &rule.error {
        ErrorModel::Gaussian(g) => g.sample(rng),
        ErrorModel::Exact { offset } => *offset,
    }
}

/// One unit's detections for a frame: `(object, active error model)`.
/// Detection draws use the `(unit_id, object)` substream of `streams`.
pub fn observe(
    pem: &Pem,
    unit_id: usize,
    unit_pose: &Pose2,
    carrier: Carrier,
    world: &WorldState,
    streams: &FrameStreams,
) -> Result<Vec<(ActorId, ErrorModel)>, GeometryError> {
    let mut out = Vec::new();
    for obj in &world.objects {
        if carrier == Carrier::Actor(obj.id) {
            continue;
        }
        let Some(rule) = select_condition(pem, unit_pose, obj) else {
            continue;
        };
        let occluders = match rule.detection {
            DetectionModel::VisibilityProportional => occluders_for(world, obj.id, carrier),
            _ => Vec::new(),
        };
        let mut rng = streams.detection(unit_id, obj.id.0);
        if detect(
            rule,
            unit_pose,
            obj,
            &occluders,
            pem.visibility_samples,
            &mut rng,
        )? {
            out.push((obj.id, rule.error));
        }
    }
    Ok(out)
}

/// Applies a single PEM to a world snapshot, as unit 0.
pub fn apply_pem(
    pem: &Pem,
    unit_pose: &Pose2,
    carrier: Carrier,
    world: &WorldState,
    streams: &FrameStreams,
) -> Result<Vec<PerceivedObject>, GeometryError> {
    let detections = observe(pem, 0, unit_pose, carrier, world, streams)?;
    Ok(detections
        .into_iter()
        .filter_map(|(id, error)| {
            let obj = world.object(id)?;
            let mut rng = streams.sampling(id.0);
            let eps = match error {
                ErrorModel::Gaussian(g) => g.sample(&mut rng),
                ErrorModel::Exact { offset } => offset,
            };
            Some(PerceivedObject {
                source_id: id,
                position: obj.footprint.center + eps,
                velocity: obj.velocity,
                class_tag: obj.class_tag,
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    fn obj(id: u64, x: f64, y: f64) -> GroundTruthObject {
        GroundTruthObject {
            id: ActorId(id),
            footprint: Footprint::new(Vec2::new(x, y), 0.3, 0.3, 0.0).unwrap(),
            velocity: Vec2::new(0.0, 1.0),
            class_tag: ClassTag::Pedestrian,
        }
    }

    fn world(objects: Vec<GroundTruthObject>) -> WorldState {
        WorldState {
            time: 0.0,
            step: 0,
            objects,
            ego: EgoState {
                footprint: Footprint::new(Vec2::new(-100.0, 0.0), 2.0, 0.9, 0.0).unwrap(),
                speed: 0.0,
            },
        }
    }

    fn rule(lo: f64, hi: f64, detection: DetectionModel) -> ConditionRule {
        ConditionRule::new(
            SectorGate::new(PI, lo, hi).unwrap(),
            detection,
            ErrorModel::Gaussian(GaussianError::isotropic(1.0).unwrap()),
        )
        .unwrap()
    }

    fn near_far() -> Pem {
        Pem::new(vec![
            rule(0.0, 20.0, DetectionModel::Always),
            rule(20.0, 100.0, DetectionModel::FixedRate(0.5)),
        ])
        .unwrap()
    }

    #[test]
    fn first_matching_rule_wins() {
        let pem = near_far();
        let at = Pose2::new(Vec2::ZERO, 0.0);
        let near = select_condition(&pem, &at, &obj(1, 5.0, 0.0)).unwrap();
        assert_eq!(near.detection, DetectionModel::Always);
        let edge = select_condition(&pem, &at, &obj(1, 20.0, 0.0)).unwrap();
        assert_eq!(edge.detection, DetectionModel::Always);
        assert!(select_condition(&pem, &at, &obj(1, 150.0, 0.0)).is_none());
    }

    #[test]
    fn validation_errors() {
        assert_eq!(Pem::new(vec![]), Err(PemError::NoRules));
        assert!(matches!(
            GaussianError::new(Vec2::ZERO, Mat2::symmetric(1.0, 2.0, 1.0)),
            Err(PemError::NotPositiveDefinite(_))
        ));
        assert!(GaussianError::new(Vec2::ZERO, Mat2::new(1.0, 0.1, 0.0, 1.0)).is_err());
        assert!(matches!(
            ConditionRule::new(
                SectorGate::full_circle(1.0),
                DetectionModel::FixedRate(1.5),
                ErrorModel::NONE
            ),
            Err(PemError::InvalidRate(_))
        ));
    }

    #[test]
    fn visibility_extremes_are_deterministic() {
        let r = rule(0.0, 100.0, DetectionModel::VisibilityProportional);
        let sensor = Pose2::new(Vec2::ZERO, 0.0);
        let target = obj(1, 10.0, 0.0);
        let wall = Footprint::new(Vec2::new(5.0, 0.0), 0.5, 3.0, 0.0).unwrap();
        let mut rng = SimRng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(!detect(&r, &sensor, &target, &[wall], 32, &mut rng).unwrap());
            assert!(detect(&r, &sensor, &target, &[], 32, &mut rng).unwrap());
        }
    }

    #[test]
    fn fixed_rate_bernoulli() {
        // 0.6 ± 0.01 is beyond 6 standard errors at n = 1e5
        let r = rule(0.0, 100.0, DetectionModel::FixedRate(0.6));
        let sensor = Pose2::new(Vec2::ZERO, 0.0);
        let mut rng = SimRng::seed_from_u64(9);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| detect(&r, &sensor, &obj(1, 5.0, 0.0), &[], 32, &mut rng).unwrap())
            .count();
        assert!((hits as f64 / n as f64 - 0.6).abs() < 0.01);
    }

    fn empirical_cov(samples: &[Vec2]) -> (Vec2, Mat2) {
        let n = samples.len() as f64;
        let mean = samples.iter().fold(Vec2::ZERO, |a, &s| a + s) * (1.0 / n);
        let mut c = Mat2::ZERO;
        for &s in samples {
            let d = s - mean;
            c = c + Mat2::new(d.x * d.x, d.x * d.y, d.y * d.x, d.y * d.y);
        }
        (mean, c.scale(1.0 / (n - 1.0)))
    }

    #[test]
    fn unit_variance_error_statistics() {
        let r = rule(0.0, 100.0, DetectionModel::Always);
        let mut rng = SimRng::seed_from_u64(3);
        let n = 100_000;
        let samples: Vec<Vec2> = (0..n).map(|_| sample_error(&r, &mut rng)).collect();
        let (mean, cov) = empirical_cov(&samples);
        assert!((cov - Mat2::IDENTITY).frobenius() / Mat2::IDENTITY.frobenius() < 0.02);
        let bound = 3.0 / (n as f64).sqrt();
        assert!(mean.x.abs() < bound && mean.y.abs() < bound);
    }

    #[test]
    fn anisotropic_variance_ratio() {
        let g = GaussianError::new(Vec2::ZERO, Mat2::diag(4.0, 1.0)).unwrap();
        let mut rng = SimRng::seed_from_u64(4);
        let samples: Vec<Vec2> = (0..100_000).map(|_| g.sample(&mut rng)).collect();
        let (_, cov) = empirical_cov(&samples);
        assert!((cov.xx / cov.yy / 4.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn identity_pem_reproduces_ground_truth() {
        let w = world(vec![obj(1, 5.0, 0.0), obj(2, -3.0, 4.0)]);
        let out = apply_pem(
            &Pem::identity(1000.0),
            &Pose2::new(Vec2::ZERO, 0.0),
            Carrier::Fixed,
            &w,
            &FrameStreams::new(0),
        )
        .unwrap();
        assert_eq!(out.len(), 2);
        for (p, o) in out.iter().zip(&w.objects) {
            assert_eq!(p.position, o.footprint.center);
            assert_eq!(p.velocity, o.velocity);
            assert_eq!(p.source_id, o.id);
        }
    }

    #[test]
    fn exact_offset_is_applied() {
        let pem = Pem::new(vec![ConditionRule::new(
            SectorGate::full_circle(100.0),
            DetectionModel::Always,
            ErrorModel::Exact {
                offset: Vec2::new(0.5, -0.25),
            },
        )
        .unwrap()])
        .unwrap();
        let w = world(vec![obj(1, 5.0, 0.0)]);
        let out = apply_pem(
            &pem,
            &Pose2::new(Vec2::ZERO, 0.0),
            Carrier::Fixed,
            &w,
            &FrameStreams::new(1),
        )
        .unwrap();
        assert_eq!(out[0].position, Vec2::new(5.5, -0.25));
    }

    #[test]
    fn fully_occluded_object_is_dropped() {
        let pem = Pem::new(vec![rule(
            0.0,
            100.0,
            DetectionModel::VisibilityProportional,
        )])
        .unwrap();
        let mut wall = obj(2, 5.0, 0.0);
        wall.footprint = Footprint::new(Vec2::new(5.0, 0.0), 0.5, 3.0, 0.0).unwrap();
        wall.class_tag = ClassTag::StaticObstacle;
        let w = world(vec![obj(1, 10.0, 0.0), wall]);
        for k in 0..200 {
            let out = apply_pem(
                &pem,
                &Pose2::new(Vec2::ZERO, 0.0),
                Carrier::Fixed,
                &w,
                &FrameStreams::new(k),
            )
            .unwrap();
            assert!(out.iter().all(|p| p.source_id != ActorId(1)));
            assert!(out.len() <= w.objects.len());
        }
    }

    #[test]
    fn carrier_does_not_occlude_or_perceive_itself() {
        let pem = Pem::new(vec![rule(
            0.0,
            100.0,
            DetectionModel::VisibilityProportional,
        )])
        .unwrap();
        let mut carrier = obj(7, 0.0, 0.0);
        carrier.footprint = Footprint::new(Vec2::ZERO, 2.0, 1.0, 0.0).unwrap();
        let w = world(vec![carrier, obj(1, 10.0, 0.0)]);
        let out = apply_pem(
            &pem,
            &Pose2::new(Vec2::ZERO, 0.0),
            Carrier::Actor(ActorId(7)),
            &w,
            &FrameStreams::new(5),
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].source_id, ActorId(1));
    }

    #[test]
    fn deterministic_given_streams() {
        let pem = near_far();
        let w = world(vec![obj(1, 5.0, 0.0), obj(2, 50.0, 3.0)]);
        let at = Pose2::new(Vec2::ZERO, 0.0);
        let a = apply_pem(&pem, &at, Carrier::Fixed, &w, &FrameStreams::new(77)).unwrap();
        let b = apply_pem(&pem, &at, Carrier::Fixed, &w, &FrameStreams::new(77)).unwrap();
        assert_eq!(a, b);
    }
}
