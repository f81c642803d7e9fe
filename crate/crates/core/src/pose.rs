//! Homogeneous transforms for the simulated perception chain.
//!
//! `ᴬH_B` maps a point expressed in frame `B` into frame `A`. The part
//! pose seen by the camera is brought into the robot frame by chaining
//! `ʳᵒᵇᵒᵗH_tool · ᵗᵒᵒˡH_camera · ᶜᵃᵐᵉʳᵃH_part`.

use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, Vector3};
use thiserror::Error;

/// Orthonormality and determinant tolerance.
pub const POSE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("invalid pose: {0}")]
    InvalidPose(&'static str),
}

/// A rigid 4×4 homogeneous transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose(Matrix4<f64>);

impl Pose {
    pub fn identity() -> Self {
        Pose(Matrix4::identity())
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose(Matrix4::new_translation(&Vector3::new(x, y, z)))
    }

    pub fn from_parts(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        let mut m = rotation.to_homogeneous();
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Pose(m)
    }

    /// Rotation of `angle` radians about `axis`, then no translation.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        Self::from_parts(
            Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle),
            Vector3::zeros(),
        )
    }

    /// Validates an arbitrary matrix as a rigid transform.
    pub fn from_matrix(m: Matrix4<f64>) -> Result<Self, PoseError> {
        let pose = Pose(m);
        pose.validate()?;
        Ok(pose)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        let m = &self.0;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(PoseError::InvalidPose("non-finite entry"));
        }
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(PoseError::InvalidPose("bottom row must be (0, 0, 0, 1)"));
        }
        let r = self.rotation();
        if (r.transpose() * r - Matrix3::identity()).abs().max() > POSE_TOLERANCE {
            return Err(PoseError::InvalidPose("rotation is not orthonormal"));
        }
        if (r.determinant() - 1.0).abs() > POSE_TOLERANCE {
            return Err(PoseError::InvalidPose("rotation determinant is not +1"));
        }
        Ok(())
    }

    /// `self · other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let mut m = self.0 * other.0;
        // keep the bottom row exact
        m[(3, 0)] = 0.0;
        m[(3, 1)] = 0.0;
        m[(3, 2)] = 0.0;
        m[(3, 3)] = 1.0;
        Pose(m)
    }
}

/// Expresses the part pose in the robot frame.
pub fn pose_in_robot_frame(
    robot_h_tool: &Pose,
    tool_h_camera: &Pose,
    camera_h_part: &Pose,
) -> Result<Pose, PoseError> {
    robot_h_tool.validate()?;
    tool_h_camera.validate()?;
    camera_h_part.validate()?;
    let out = robot_h_tool.compose(tool_h_camera).compose(camera_h_part);
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_chain() {
        let i = Pose::identity();
        assert_eq!(pose_in_robot_frame(&i, &i, &i).unwrap(), i);
    }

    #[test]
    fn translations_add() {
        let out = pose_in_robot_frame(
            &Pose::from_translation(1.0, 0.0, 0.0),
            &Pose::identity(),
            &Pose::from_translation(0.0, 1.0, 0.0),
        )
        .unwrap();
        assert_eq!(out.translation(), Vector3::new(1.0, 1.0, 0.0));
        assert_eq!(out.rotation(), Matrix3::identity());
    }

    #[test]
    fn rejects_invalid_matrices() {
        let mut m = Matrix4::identity();
        m[(0, 0)] = 2.0;
        assert!(Pose::from_matrix(m).is_err());
        let mut m = Matrix4::identity();
        m[(3, 0)] = 0.5;
        assert!(Pose::from_matrix(m).is_err());
        // reflection: orthonormal but det = -1
        let mut m = Matrix4::identity();
        m[(2, 2)] = -1.0;
        assert_eq!(
            Pose::from_matrix(m),
            Err(PoseError::InvalidPose("rotation determinant is not +1"))
        );
    }

    #[test]
    fn rotation_about_z_moves_x_to_y() {
        let rz = Pose::from_axis_angle(Vector3::z(), FRAC_PI_2);
        let t = Pose::from_translation(0.1, 0.0, 0.0);
        let out = rz.compose(&t);
        assert!(
            (out.translation() - Vector3::new(0.0, 0.1, 0.0))
                .abs()
                .max()
                < 1e-15
        );
    }
}
