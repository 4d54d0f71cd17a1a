use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;

use copem::fusion::{fuse_gaussians, ideal_fuse, UnitObservation};
use copem::geometry::{Pose2, Vec2};
use copem::linalg::Mat2;
use copem::pem::{apply_pem, observe, ActorId, Carrier, GaussianError};
use copem::rng::FrameStreams;
use copem::scenario::{default_onboard_pem, default_scenario, step_world};

fn spd() -> impl Strategy<Value = Mat2> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, 0.05..1.0f64).prop_map(|(a, b, c, eps)| {
        // L Lᵀ + εI with L lower triangular
        Mat2::symmetric(a * a + eps, a * b, b * b + c * c + eps)
    })
}

fn na(m: Mat2) -> Matrix2<f64> {
    Matrix2::new(m.xx, m.xy, m.yx, m.yy)
}

proptest! {
    #[test]
    fn mean_is_precision_weighted(inputs in prop::collection::vec((spd(), -5.0..5.0f64, -5.0..5.0f64), 1..6)) {
        let obs: Vec<UnitObservation> = inputs
            .iter()
            .enumerate()
            .map(|(i, &(c, x, y))| UnitObservation {
                unit_id: i,
                object_id: ActorId(4),
                error_model: GaussianError::new(Vec2::new(x, y), c).unwrap(),
            })
            .collect();
        let f = fuse_gaussians(&obs).unwrap();

        let mut precision = Matrix2::zeros();
        let mut info = Vector2::zeros();
        for (c, x, y) in &inputs {
            let p = na(*c).try_inverse().unwrap();
            precision += p;
            info += p * Vector2::new(*x, *y);
        }
        let cov = precision.try_inverse().unwrap();
        let mean = cov * info;
        prop_assert!((na(f.covariance) - cov).norm() <= 1e-9 * cov.norm());
        prop_assert!((Vector2::new(f.mean.x, f.mean.y) - mean).norm() <= 1e-9 * (1.0 + mean.norm()));
        prop_assert_eq!(f.contributor_count, inputs.len());
        // the fused ellipse is never larger than the tightest input, in trace
        let min_trace = inputs.iter().map(|(c, ..)| c.trace()).fold(f64::INFINITY, f64::min);
        prop_assert!(f.covariance.trace() <= min_trace * (1.0 + 1e-12));
    }
}

#[test]
fn single_unit_fusion_reproduces_its_pem_bitwise() {
    let s = default_scenario();
    let pem = default_onboard_pem();
    let mut st = s.initial_state();
    let mut checked = 0;
    for k in 0..110u64 {
        let w = &st.world;
        let streams = FrameStreams::for_step(21, k);
        let pose: Pose2 = w.ego.pose();
        let direct = apply_pem(&pem, &pose, Carrier::Ego, w, &streams).unwrap();
        let per_unit = vec![(
            0,
            observe(&pem, 0, &pose, Carrier::Ego, w, &streams).unwrap(),
        )];
        let fused = ideal_fuse(&per_unit, w, &streams).unwrap();
        assert_eq!(direct.len(), fused.len());
        for (a, b) in direct.iter().zip(&fused) {
            assert_eq!(a.source_id, b.source_id);
            assert_eq!(a.position.x.to_bits(), b.position.x.to_bits());
            assert_eq!(a.position.y.to_bits(), b.position.y.to_bits());
        }
        checked += direct.len();
        st = step_world(&s, &st, 0.0);
    }
    assert!(checked > 0);
}
