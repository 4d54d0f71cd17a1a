//! Plan-view geometry: poses, oriented rectangles, sensor gates and the
//! sight-line sampling used to turn occlusion into a detection probability.
//!
//! Coordinates are absolute world meters, `x` easting and `y` northing.
//! Headings are radians counter-clockwise from the +x axis.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of perimeter samples used by [`visible_fraction`].
pub const DEFAULT_VISIBILITY_SAMPLES: usize = 32;

/// Smallest sample count accepted by [`visible_fraction`].
pub const MIN_VISIBILITY_SAMPLES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("visibility needs at least {MIN_VISIBILITY_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid footprint: {0}")]
    InvalidFootprint(String),
    #[error("invalid sector gate: {0}")]
    InvalidGate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `heading`.
    pub fn from_heading(heading: f64) -> Self {
        Self::new(heading.cos(), heading.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Rotates counter-clockwise by `angle` radians.
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub position: Vec2,
    heading: f64,
}

impl Pose2 {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Self {
            position,
            heading: normalize_angle(heading),
        }
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    /// Expresses a world point in this pose's frame (x forward, y left).
    pub fn to_local(&self, point: Vec2) -> Vec2 {
        (point - self.position).rotate(-self.heading)
    }
}

/// Oriented rectangle occupied by an actor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub center: Vec2,
    pub half_length: f64,
    pub half_width: f64,
    pub heading: f64,
}

impl Footprint {
    pub fn new(
        center: Vec2,
        half_length: f64,
        half_width: f64,
        heading: f64,
    ) -> Result<Self, GeometryError> {
        let fp = Self {
            center,
            half_length,
            half_width,
            heading,
        };
        fp.validate()?;
        Ok(fp)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.center.is_finite() || !self.heading.is_finite() {
            return Err(GeometryError::InvalidFootprint(
                "non-finite center or heading".into(),
            ));
        }
        if !(self.half_length > 0.0 && self.half_width > 0.0)
            || !self.half_length.is_finite()
            || !self.half_width.is_finite()
        {
            return Err(GeometryError::InvalidFootprint(format!(
                "extents must be positive, got {} x {}",
                self.half_length, self.half_width
            )));
        }
        Ok(())
    }

    /// Same rectangle moved to a new center.
    pub fn at(&self, center: Vec2) -> Footprint {
        Footprint { center, ..*self }
    }

    fn axes(&self) -> (Vec2, Vec2) {
        let forward = Vec2::from_heading(self.heading);
        (forward, Vec2::new(-forward.y, forward.x))
    }

    /// Corners in counter-clockwise order starting at front-right.
    pub fn corners(&self) -> [Vec2; 4] {
        let (fwd, left) = self.axes();
        let l = fwd * self.half_length;
        let w = left * self.half_width;
        [
            self.center + l - w,
            self.center + l + w,
            self.center - l + w,
            self.center - l - w,
        ]
    }

    /// Edges as (start, end) pairs, counter-clockwise, so the outward
    /// normal of each is the edge direction rotated clockwise.
    pub fn edges(&self) -> [(Vec2, Vec2); 4] {
        let c = self.corners();
        [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]
    }

    fn local(&self, p: Vec2) -> Vec2 {
        (p - self.center).rotate(-self.heading)
    }

    /// Closed containment test (boundary counts as inside).
    pub fn contains(&self, p: Vec2) -> bool {
        let q = self.local(p);
        q.x.abs() <= self.half_length && q.y.abs() <= self.half_width
    }

    pub fn perimeter(&self) -> f64 {
        4.0 * (self.half_length + self.half_width)
    }

    /// True if the closed segment `a`–`b` touches the closed rectangle.
    /// Grazing a corner or running along an edge counts as touching.
    pub fn segment_hits(&self, a: Vec2, b: Vec2) -> bool {
        let p = self.local(a);
        let d = self.local(b) - p;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        // Liang–Barsky clipping against the local axis-aligned box
        for (origin, dir, half) in [(p.x, d.x, self.half_length), (p.y, d.y, self.half_width)] {
            for (q, r) in [(-dir, origin + half), (dir, half - origin)] {
                if q == 0.0 {
                    if r < 0.0 {
                        return false;
                    }
                } else {
                    let t = r / q;
                    if q < 0.0 {
                        t0 = t0.max(t);
                    } else {
                        t1 = t1.min(t);
                    }
                    if t0 > t1 {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Angular and range window of a sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorGate {
    pub fov_half_angle: f64,
    pub min_range: f64,
    pub max_range: f64,
}

impl SectorGate {
    pub fn new(fov_half_angle: f64, min_range: f64, max_range: f64) -> Result<Self, GeometryError> {
        let gate = Self {
            fov_half_angle,
            min_range,
            max_range,
        };
        gate.validate()?;
        Ok(gate)
    }

    /// Omnidirectional gate covering `[0, max_range]`.
    pub fn full_circle(max_range: f64) -> Self {
        Self {
            fov_half_angle: PI,
            min_range: 0.0,
            max_range,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fov_half_angle > 0.0 && self.fov_half_angle <= PI) {
            return Err(GeometryError::InvalidGate(format!(
                "fov half angle {} outside (0, pi]",
                self.fov_half_angle
            )));
        }
        if !(self.min_range >= 0.0) || !(self.max_range > self.min_range) {
            return Err(GeometryError::InvalidGate(format!(
                "ranges must satisfy 0 <= min < max, got [{}, {}]",
                self.min_range, self.max_range
            )));
        }
        Ok(())
    }
}

/// Whether `point` lies inside the sensor's gate. Range bounds and the
/// angular bound are inclusive.
pub fn in_sector(sensor: &Pose2, point: Vec2, gate: &SectorGate) -> bool {
    let rel = point - sensor.position;
    let range = rel.norm();
    if range < gate.min_range || range > gate.max_range {
        return false;
    }
    if gate.fov_half_angle >= PI || range == 0.0 {
        return true;
    }
    let bearing = normalize_angle(rel.y.atan2(rel.x) - sensor.heading());
    bearing.abs() <= gate.fov_half_angle
}

/// Fraction of the target's sensor-facing perimeter with a clear sight
/// line to the sensor.
///
/// `samples` points are spread uniformly (cell midpoints) along the edges
/// whose outward normal faces the sensor; each point is ray-cast to the
/// sensor against every occluder. A sight line that touches an occluder,
/// even at a single corner, is blocked.
pub fn visible_fraction(
    sensor: &Pose2,
    target: &Footprint,
    occluders: &[Footprint],
    samples: usize,
) -> Result<f64, GeometryError> {
    if samples < MIN_VISIBILITY_SAMPLES {
        return Err(GeometryError::TooFewSamples(samples));
    }
    let eye = sensor.position;
    if target.contains(eye) {
        return Err(GeometryError::Degenerate(
            "sensor lies inside the target footprint".into(),
        ));
    }
    if occluders.iter().any(|o| o.contains(eye)) {
        return Err(GeometryError::Degenerate(
            "sensor lies inside an occluder footprint".into(),
        ));
    }

    let facing: Vec<(Vec2, Vec2)> = target
        .edges()
        .into_iter()
        .filter(|&(a, b)| {
            let dir = b - a;
            let outward = Vec2::new(dir.y, -dir.x);
            outward.dot(eye - (a + b) * 0.5) > 0.0
        })
        .collect();
    let facing_length: f64 = facing.iter().map(|&(a, b)| a.distance(b)).sum();
    if facing.is_empty() || facing_length <= 0.0 {
        return Err(GeometryError::Degenerate(
            "no target edge faces the sensor".into(),
        ));
    }

    // Cheap reject: occluders that cannot intersect any sight line.
    let relevant: Vec<&Footprint> = occluders
        .iter()
        .filter(|o| {
            let reach = o.half_length.hypot(o.half_width);
            facing.iter().any(|&(a, b)| {
                segment_point_distance(eye, a, o.center) <= reach
                    || segment_point_distance(eye, b, o.center) <= reach
                    || triangle_may_touch(eye, a, b, o.center, reach)
            })
        })
        .collect();

    let step = facing_length / samples as f64;
    let mut visible = 0usize;
    let mut edge_idx = 0usize;
    let mut edge_start = 0.0_f64;
    for i in 0..samples {
        let s = (i as f64 + 0.5) * step;
        while edge_idx + 1 < facing.len()
            && s > edge_start + facing[edge_idx].0.distance(facing[edge_idx].1)
        {
            edge_start += facing[edge_idx].0.distance(facing[edge_idx].1);
            edge_idx += 1;
        }
        let (a, b) = facing[edge_idx];
        let len = a.distance(b);
        let t = ((s - edge_start) / len).clamp(0.0, 1.0);
        let point = a + (b - a) * t;
        if !relevant.iter().any(|o| o.segment_hits(point, eye)) {
            visible += 1;
        }
    }
    Ok(visible as f64 / samples as f64)
}

fn triangle_may_touch(eye: Vec2, a: Vec2, b: Vec2, center: Vec2, reach: f64) -> bool {
    // center inside the triangle (eye, a, b), or close to its far edge
    let d1 = (a - eye).cross(center - eye);
    let d2 = (b - a).cross(center - a);
    let d3 = (eye - b).cross(center - b);
    let inside = (d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0) || (d1 <= 0.0 && d2 <= 0.0 && d3 <= 0.0);
    inside || segment_point_distance(a, b, center) <= reach
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn segment_point_distance(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    // collinear / touching cases are covered by the endpoint distances
    false
}

fn segment_distance(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    segment_point_distance(c, d, a)
        .min(segment_point_distance(c, d, b))
        .min(segment_point_distance(a, b, c))
        .min(segment_point_distance(a, b, d))
}

/// Minimum Euclidean distance between two rectangles, zero when they overlap.
pub fn footprint_distance(a: &Footprint, b: &Footprint) -> f64 {
    if a.contains(b.center) || b.contains(a.center) {
        return 0.0;
    }
    if a.corners().iter().any(|&c| b.contains(c)) || b.corners().iter().any(|&c| a.contains(c)) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (p, q) in a.edges() {
        for (r, s) in b.edges() {
            best = best.min(segment_distance(p, q, r, s));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn square(x: f64, y: f64) -> Footprint {
        Footprint::new(Vec2::new(x, y), 0.5, 0.5, 0.0).unwrap()
    }

    fn origin() -> Pose2 {
        Pose2::new(Vec2::ZERO, 0.0)
    }

    #[test]
    fn heading_is_normalized() {
        assert_eq!(Pose2::new(Vec2::ZERO, PI).heading(), -PI);
        assert!((Pose2::new(Vec2::ZERO, 3.0 * PI + 0.1).heading() - (-PI + 0.1)).abs() < 1e-12);
        assert!((Pose2::new(Vec2::ZERO, -FRAC_PI_2).heading() + FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn unobstructed_target_fully_visible() {
        let target = Footprint::new(Vec2::new(10.0, 0.0), 1.0, 1.0, 0.0).unwrap();
        assert_eq!(visible_fraction(&origin(), &target, &[], 32).unwrap(), 1.0);
    }

    #[test]
    fn wide_occluder_blocks_everything() {
        let target = Footprint::new(Vec2::new(10.0, 0.0), 1.0, 1.0, 0.0).unwrap();
        let wall = Footprint::new(Vec2::new(5.0, 0.0), 0.5, 3.0, 0.0).unwrap();
        assert_eq!(
            visible_fraction(&origin(), &target, &[wall], 32).unwrap(),
            0.0
        );
    }

    #[test]
    fn half_cover_matches_dense_edge_oracle() {
        let target = Footprint::new(Vec2::new(10.0, 0.0), 1.0, 1.0, 0.0).unwrap();
        // spans y in [0, 1] at x = 5: shadows the upper half of the near face
        let occ = Footprint::new(Vec2::new(5.0, 0.5), 0.1, 0.5, 0.0).unwrap();

        // Oracle: 10^4 points on the only facing edge (x = 9), blocked when
        // the sight line crosses the occluder's x-slab inside its y-range.
        let n = 10_000;
        let blocked = (0..n)
            .filter(|i| {
                let y = -1.0 + 2.0 * (*i as f64 + 0.5) / n as f64;
                [4.9, 5.1].iter().any(|&x| {
                    let y_at = y * x / 9.0;
                    (0.0..=1.0).contains(&y_at)
                })
            })
            .count();
        let oracle = 1.0 - blocked as f64 / n as f64;
        assert!((oracle - 0.5).abs() < 1e-3);

        for k in [8, 32, 100] {
            let f = visible_fraction(&origin(), &target, &[occ], k).unwrap();
            assert!((f - oracle).abs() <= 1.0 / k as f64, "k={k} f={f}");
        }
    }

    #[test]
    fn sensor_inside_is_degenerate() {
        let target = square(0.0, 0.0);
        assert!(matches!(
            visible_fraction(&origin(), &target, &[], 32),
            Err(GeometryError::Degenerate(_))
        ));
        let t2 = square(5.0, 0.0);
        let occ = square(0.2, 0.0);
        assert!(matches!(
            visible_fraction(&origin(), &t2, &[occ], 32),
            Err(GeometryError::Degenerate(_))
        ));
    }

    #[test]
    fn too_few_samples_rejected() {
        assert_eq!(
            visible_fraction(&origin(), &square(5.0, 0.0), &[], 4),
            Err(GeometryError::TooFewSamples(4))
        );
    }

    #[test]
    fn grazing_corner_counts_as_blocked() {
        // Occluder corner sits exactly on the sight line to the only sample.
        let seg_end = Vec2::new(10.0, 0.0);
        let occ = Footprint::new(Vec2::new(5.0, 0.5), 0.5, 0.5, 0.0).unwrap();
        assert!(occ.segment_hits(Vec2::ZERO, seg_end));
        let clear = Footprint::new(Vec2::new(5.0, 0.5 + 1e-9), 0.5, 0.5, 0.0).unwrap();
        assert!(!clear.segment_hits(Vec2::ZERO, seg_end));
    }

    #[test]
    fn sector_boundaries() {
        let gate = SectorGate::new(FRAC_PI_2, 0.0, 20.0).unwrap();
        assert!(in_sector(&origin(), Vec2::new(20.0, 0.0), &gate));
        assert!(!in_sector(&origin(), Vec2::new(20.0 + 1e-9, 0.0), &gate));
        assert!(!in_sector(&origin(), Vec2::new(-5.0, 0.0), &gate));
        assert!(in_sector(&origin(), Vec2::new(0.0, 5.0), &gate));

        let omni = SectorGate::full_circle(10.0);
        assert!(in_sector(&origin(), Vec2::new(-9.0, 0.0), &omni));
        assert!(!in_sector(&origin(), Vec2::new(-11.0, 0.0), &omni));

        let ring = SectorGate::new(PI, 5.0, 10.0).unwrap();
        assert!(!in_sector(&origin(), Vec2::new(4.0, 0.0), &ring));
        assert!(in_sector(&origin(), Vec2::new(5.0, 0.0), &ring));
    }

    #[test]
    fn gate_validation() {
        assert!(SectorGate::new(0.0, 0.0, 1.0).is_err());
        assert!(SectorGate::new(PI + 0.1, 0.0, 1.0).is_err());
        assert!(SectorGate::new(1.0, 5.0, 5.0).is_err());
        assert!(Footprint::new(Vec2::ZERO, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn distance_basic_cases() {
        assert_eq!(
            footprint_distance(&square(0.0, 0.0), &square(1.0, 0.0)),
            0.0
        );
        assert!((footprint_distance(&square(0.0, 0.0), &square(3.0, 0.0)) - 2.0).abs() < 1e-12);
        assert_eq!(
            footprint_distance(&square(0.0, 0.0), &square(0.3, 0.2)),
            0.0
        );
        let inner = Footprint::new(Vec2::ZERO, 0.1, 0.1, 0.3).unwrap();
        let outer = Footprint::new(Vec2::ZERO, 2.0, 2.0, 0.0).unwrap();
        assert_eq!(footprint_distance(&inner, &outer), 0.0);
    }

    fn brute_force_distance(a: &Footprint, b: &Footprint, n: usize) -> f64 {
        let sample = |f: &Footprint| -> Vec<Vec2> {
            f.edges()
                .iter()
                .flat_map(|&(p, q)| (0..=n).map(move |i| p + (q - p) * (i as f64 / n as f64)))
                .collect()
        };
        let pa = sample(a);
        let pb = sample(b);
        pa.iter()
            .flat_map(|p| pb.iter().map(move |q| p.distance(*q)))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn rotated_distance_matches_boundary_sampling() {
        let a = Footprint::new(Vec2::new(0.0, 0.0), 2.0, 1.0, 0.4).unwrap();
        let b = Footprint::new(Vec2::new(5.0, 2.0), 1.5, 0.5, -1.1).unwrap();
        let exact = footprint_distance(&a, &b);
        let brute = brute_force_distance(&a, &b, 2000);
        assert!(exact > 0.0);
        assert!(exact <= brute + 1e-12);
        assert!((exact - brute).abs() < 1e-3, "{exact} vs {brute}");
    }

    fn arb_footprint() -> impl Strategy<Value = Footprint> {
        (
            -20.0..20.0f64,
            -20.0..20.0f64,
            0.2..3.0f64,
            0.2..3.0f64,
            -PI..PI,
        )
            .prop_map(|(x, y, l, w, h)| Footprint::new(Vec2::new(x, y), l, w, h).unwrap())
    }

    proptest! {
        #[test]
        fn visibility_bounded_and_monotone(
            target in arb_footprint(),
            occ in prop::collection::vec(arb_footprint(), 0..4),
            extra in arb_footprint(),
            sx in -40.0..40.0f64, sy in -40.0..40.0f64,
        ) {
            let sensor = Pose2::new(Vec2::new(sx, sy), 0.0);
            prop_assume!(!target.contains(sensor.position));
            prop_assume!(!occ.iter().chain([&extra]).any(|o| o.contains(sensor.position)));
            let base = visible_fraction(&sensor, &target, &occ, 32).unwrap();
            prop_assert!((0.0..=1.0).contains(&base));
            let mut more = occ.clone();
            more.push(extra);
            let after = visible_fraction(&sensor, &target, &more, 32).unwrap();
            prop_assert!(after <= base);
            prop_assert_eq!(visible_fraction(&sensor, &target, &[], 16).unwrap(), 1.0);
        }

        #[test]
        fn distance_symmetric_and_translation_triangle(
            a in arb_footprint(), b in arb_footprint(), dx in -5.0..5.0f64, dy in -5.0..5.0f64,
        ) {
            let dab = footprint_distance(&a, &b);
            prop_assert!((dab - footprint_distance(&b, &a)).abs() < 1e-9);
            prop_assert!(dab >= 0.0);
            // moving b by t changes the distance by at most |t|
            let moved = b.at(b.center + Vec2::new(dx, dy));
            let shift = dx.hypot(dy);
            prop_assert!(footprint_distance(&a, &moved) <= dab + shift + 1e-9);
            prop_assert!(dab <= footprint_distance(&a, &moved) + shift + 1e-9);
        }

        #[test]
        fn full_circle_is_pure_range_test(px in -30.0..30.0f64, py in -30.0..30.0f64, h in -PI..PI) {
            let gate = SectorGate::full_circle(15.0);
            let sensor = Pose2::new(Vec2::new(1.0, -2.0), h);
            let p = Vec2::new(px, py);
            prop_assert_eq!(in_sector(&sensor, p, &gate), p.distance(sensor.position) <= 15.0);
        }
    }
}
