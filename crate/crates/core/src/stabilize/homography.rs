use nalgebra::{Matrix3, Vector3};

use super::StabilizeError;
use crate::geo::{Intrinsics, Pose};

/// Projective map between two image planes, `x_dst ~ H · x_src`.
///
/// Stored normalized so that `h33 = 1` whenever `h33` is not (numerically) zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

const SINGULAR_DET: f64 = 1e-12;

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self, StabilizeError> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(StabilizeError::SingularHomography);
        }
        let m = if m[(2, 2)].abs() > 1e-12 {
            m / m[(2, 2)]
        } else {
            m
        };
        if m.determinant().abs() <= SINGULAR_DET {
            return Err(StabilizeError::SingularHomography);
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self(Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0 == Matrix3::identity()
    }

    pub fn inverse(&self) -> Result<Self, StabilizeError> {
        self.0
            .try_inverse()
            .ok_or(StabilizeError::SingularHomography)
            .and_then(Self::new)
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Homography) -> Result<Self, StabilizeError> {
        Self::new(self.0 * first.0)
    }

    /// Maps a pixel; `None` when it lands on or behind the line at infinity.
    pub fn apply(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let p = self.0 * Vector3::new(x, y, 1.0);
        (p.z > 1e-12).then(|| (p.x / p.z, p.y / p.z))
    }

    /// Row-major entries, the layout used in session metadata.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn from_row_major(h: &[f64; 9]) -> Result<Self, StabilizeError> {
        Self::new(Matrix3::from_row_slice(h))
    }
}

/// Rotation-only homography `K · R_rel · K⁻¹` taking pixels of the previous
/// frame to the current one. Exact for pure rotation; translation (parallax)
/// is ignored.
pub fn infinite_homography(pose_prev: &Pose, pose_cur: &Pose, k: &Intrinsics) -> Homography {
    let r_rel = pose_cur.rotation().transpose() * pose_prev.rotation();
    let m = k.matrix() * r_rel * k.inverse_matrix();
    // K and R_rel are invertible, so the product is too
    Homography::new(m).unwrap_or_else(|_| Homography(m))
}
