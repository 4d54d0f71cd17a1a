//! Ideal fusion: ground-truth matching plus minimum-variance combination
//! of the contributing units' Gaussian error models.
//!
//! With a flat prior on the object state, the posterior of the fused error
//! is Gaussian with precision equal to the sum of the contributors'
//! precisions and a precision-weighted mean:
//!
//! ```text
//! Σ = (Σ_n Σ_n⁻¹)⁻¹        μ = Σ · Σ_n Σ_n⁻¹ μ_n
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::Vec2;
use crate::linalg::Mat2;
use crate::pem::{ActorId, ErrorModel, GaussianError, PemError, PerceivedObject, WorldState};
use crate::rng::FrameStreams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("fusion needs at least one observation")]
    Empty,
    #[error("observations mix objects {0} and {1}")]
    MixedObjects(ActorId, ActorId),
    #[error("singular covariance from unit {0}")]
    Singular(usize),
    #[error("object {0} is not present in the world state")]
    UnknownObject(ActorId),
    #[error(transparent)]
    Model(#[from] PemError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitObservation {
    pub unit_id: usize,
    pub object_id: ActorId,
    pub error_model: GaussianError,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedGaussian {
    pub mean: Vec2,
    pub covariance: Mat2,
    pub contributor_count: usize,
}

impl FusedGaussian {
    pub fn distribution(&self) -> Result<GaussianError, PemError> {
        GaussianError::new(self.mean, self.covariance)
    }
}

/// Inverse-variance weighted combination of one object's observations.
/// The result does not depend on input order.
pub fn fuse_gaussians(observations: &[UnitObservation]) -> Result<FusedGaussian, FusionError> {
    let first = observations.first().ok_or(FusionError::Empty)?;
    if let Some(other) = observations.iter().find(|o| o.object_id != first.object_id) {
        return Err(FusionError::MixedObjects(first.object_id, other.object_id));
    }
    if observations.len() == 1 {
        let g = first.error_model;
        return Ok(FusedGaussian {
            mean: g.mean(),
            covariance: g.covariance(),
            contributor_count: 1,
        });
    }

    let mut sorted: Vec<&UnitObservation> = observations.iter().collect();
    sorted.sort_by_key(|o| o.unit_id);

    let mut precision = Mat2::ZERO;
    let mut info = Vec2::ZERO;
    for obs in &sorted {
        let p = obs
            .error_model
            .covariance()
            .inverse()
            .ok_or(FusionError::Singular(obs.unit_id))?;
        precision = precision + p;
        info += p.mul_vec(obs.error_model.mean());
    }
    let covariance = precision
        .inverse()
        .ok_or(FusionError::Singular(sorted[0].unit_id))?
        .symmetrized();
    Ok(FusedGaussian {
        mean: covariance.mul_vec(info),
        covariance,
        contributor_count: sorted.len(),
    })
}

/// Fused error for one object when contributors may include exact
/// (zero-covariance) models. Exact contributors have infinite precision
/// and so dominate; several of them are averaged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FusedError {
    Gaussian(FusedGaussian),
    Exact {
        offset: Vec2,
        contributor_count: usize,
    },
}

impl FusedError {
    pub fn contributor_count(&self) -> usize {
        match self {
            FusedError::Gaussian(g) => g.contributor_count,
            FusedError::Exact {
                contributor_count, ..
            } => *contributor_count,
        }
    }
}

/// One unit's detections for a frame.
pub type UnitDetections = (usize, Vec<(ActorId, ErrorModel)>);

fn fuse_models(
    object_id: ActorId,
    mut obs: Vec<(usize, ErrorModel)>,
) -> Result<FusedError, FusionError> {
    obs.sort_by_key(|(unit, _)| *unit);
    let exact: Vec<Vec2> = obs
        .iter()
        .filter_map(|(_, m)| match m {
            ErrorModel::Exact { offset } => Some(*offset),
            ErrorModel::Gaussian(_) => None,
        })
        .collect();
    if !exact.is_empty() {
        let sum = exact.iter().fold(Vec2::ZERO, |a, &b| a + b);
        return Ok(FusedError::Exact {
            offset: sum * (1.0 / exact.len() as f64),
            contributor_count: obs.len(),
        });
    }
    let gaussians: Vec<UnitObservation> = obs
        .into_iter()
        .filter_map(|(unit_id, m)| match m {
            ErrorModel::Gaussian(g) => Some(UnitObservation {
                unit_id,
                object_id,
                error_model: g,
            }),
            ErrorModel::Exact { .. } => None,
        })
        .collect();
    fuse_gaussians(&gaussians).map(FusedError::Gaussian)
}

/// Matches detections across units by ground-truth id, fuses each object's
/// error models and draws one position error per object from the result.
///
/// An object is reported iff at least one unit detected it. Output follows
/// the order of `world.objects`. The error sample for object `j` comes
/// from `streams.sampling(j)`, so a single contributor reproduces that
/// unit's own PEM output exactly.
pub fn ideal_fuse(
    per_unit: &[UnitDetections],
    world: &WorldState,
    streams: &FrameStreams,
) -> Result<Vec<PerceivedObject>, FusionError> {
    let mut groups: BTreeMap<ActorId, Vec<(usize, ErrorModel)>> = BTreeMap::new();
    for (unit_id, detections) in per_unit {
        for (object_id, model) in detections {
            if world.object(*object_id).is_none() {
                return Err(FusionError::UnknownObject(*object_id));
            }
            groups
                .entry(*object_id)
                .or_default()
                .push((*unit_id, *model));
        }
    }

    let mut out = Vec::with_capacity(groups.len());
    for obj in &world.objects {
        let Some(obs) = groups.remove(&obj.id) else {
            continue;
        };
        let eps = match fuse_models(obj.id, obs)? {
            FusedError::Exact { offset, .. } => offset,
            FusedError::Gaussian(g) => {
                let mut rng = streams.sampling(obj.id.0);
                g.distribution()?.sample(&mut rng)
            }
        };
        out.push(PerceivedObject {
            source_id: obj.id,
            position: obj.footprint.center + eps,
            velocity: obj.velocity,
            class_tag: obj.class_tag,
        });
    }
    Ok(out)
}
