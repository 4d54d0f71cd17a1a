//! Dense 2×2 matrices for planar covariances.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

/// Row-major 2×2 matrix `[[xx, xy], [yx, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub xx: f64,
    pub xy: f64,
    pub yx: f64,
    pub yy: f64,
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2::new(0.0, 0.0, 0.0, 0.0);
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(xx: f64, xy: f64, yx: f64, yy: f64) -> Self {
        Self { xx, xy, yx, yy }
    }

    pub const fn diag(xx: f64, yy: f64) -> Self {
        Self::new(xx, 0.0, 0.0, yy)
    }

    pub const fn symmetric(xx: f64, xy: f64, yy: f64) -> Self {
        Self::new(xx, xy, xy, yy)
    }

    pub fn scale(self, k: f64) -> Mat2 {
        Mat2::new(self.xx * k, self.xy * k, self.yx * k, self.yy * k)
    }

    pub fn transpose(self) -> Mat2 {
        Mat2::new(self.xx, self.yx, self.xy, self.yy)
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(self) -> f64 {
        self.xx * self.yy - self.xy * self.yx
    }

    pub fn inverse(self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some(Mat2::new(
            self.yy * inv,
            -self.xy * inv,
            -self.yx * inv,
            self.xx * inv,
        ))
    }

    /// Averages the off-diagonal entries.
    pub fn symmetrized(self) -> Mat2 {
        let off = 0.5 * (self.xy + self.yx);
        Mat2::symmetric(self.xx, off, self.yy)
    }

    pub fn is_symmetric(self, tol: f64) -> bool {
        (self.xy - self.yx).abs() <= tol
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(self) -> (f64, f64) {
        let s = self.symmetrized();
        let mean = 0.5 * s.trace();
        let half_diff = 0.5 * (s.xx - s.yy);
        let r = half_diff.hypot(s.xy);
        (mean - r, mean + r)
    }

    pub fn is_positive_definite(self) -> bool {
        self.is_symmetric(1e-12) && self.sym_eigenvalues().0 > 0.0
    }

    /// Lower-triangular `L` with `L Lᵀ = self`; `None` unless SPD.
    pub fn cholesky(self) -> Option<Mat2> {
        if !self.is_symmetric(1e-12) || !(self.xx > 0.0) {
            return None;
        }
        let l11 = self.xx.sqrt();
        let l21 = self.yx / l11;
        let rem = self.yy - l21 * l21;
        if !(rem > 0.0) {
            return None;
        }
        Some(Mat2::new(l11, 0.0, l21, rem.sqrt()))
    }

    pub fn frobenius(self) -> f64 {
        (self.xx * self.xx + self.xy * self.xy + self.yx * self.yx + self.yy * self.yy).sqrt()
    }

    pub fn mul_vec(self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.yx * v.x + self.yy * v.y)
    }

    pub fn is_finite(self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yx.is_finite() && self.yy.is_finite()
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.xx + o.xx,
            self.xy + o.xy,
            self.yx + o.yx,
            self.yy + o.yy,
        )
    }
}

impl std::ops::Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.xx - o.xx,
            self.xy - o.xy,
            self.yx - o.yx,
            self.yy - o.yy,
        )
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.xx * o.xx + self.xy * o.yx,
            self.xx * o.xy + self.xy * o.yy,
            self.yx * o.xx + self.yy * o.yx,
            self.yx * o.xy + self.yy * o.yy,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Mat2::symmetric(4.0, 1.0, 3.0);
        let p = m * m.inverse().unwrap();
        assert!((p - Mat2::IDENTITY).frobenius() < 1e-14);
        assert!(Mat2::symmetric(1.0, 1.0, 1.0).inverse().is_none());
    }

    #[test]
    fn cholesky_reconstructs() {
        let m = Mat2::symmetric(4.0, 1.2, 2.0);
        let l = m.cholesky().unwrap();
        assert_eq!(l.xy, 0.0);
        assert!((l * l.transpose() - m).frobenius() < 1e-14);
        assert!(Mat2::symmetric(1.0, 2.0, 1.0).cholesky().is_none());
        assert!(Mat2::ZERO.cholesky().is_none());
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        assert_eq!(Mat2::diag(3.0, 1.0).sym_eigenvalues(), (1.0, 3.0));
        let (lo, hi) = Mat2::symmetric(2.0, 1.0, 2.0).sym_eigenvalues();
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
        assert!(!Mat2::symmetric(1.0, 2.0, 1.0).is_positive_definite());
    }
}
