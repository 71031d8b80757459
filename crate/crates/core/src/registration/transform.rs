use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use super::RegistrationError;
use crate::cloud::{CloudError, Point3D, PointCloud};

const ORTHO_TOL: f64 = 1e-9;

/// Proper rigid motion `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn translation(t: [f64; 3]) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::from(t),
        }
    }

    /// Checks `RᵀR = I` and `det R = 1` within 1e-9.
    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, RegistrationError> {
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if !(err <= ORTHO_TOL) || !((det - 1.0).abs() <= ORTHO_TOL) {
            return Err(RegistrationError::InvalidTransform(format!(
                "rotation is not proper orthonormal (|RtR - I| = {err:.3e}, det = {det})"
            )));
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(RegistrationError::InvalidTransform("non-finite translation".into()));
        }
        Ok(RigidTransform { rotation, translation })
    }

    /// Rotation about the z axis by `angle` radians, then translation.
    pub fn from_yaw(angle: f64, t: [f64; 3]) -> Self {
        let (s, c) = angle.sin_cos();
        RigidTransform {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Vector3::from(t),
        }
    }

    /// Rotation from an axis-angle vector (radians), then translation.
    pub fn from_axis_angle(axis_angle: [f64; 3], t: [f64; 3]) -> Self {
        let r = nalgebra::Rotation3::new(Vector3::from(axis_angle));
        RigidTransform {
            rotation: *r.matrix(),
            translation: Vector3::from(t),
        }
    }

    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform { rotation, translation }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation_vector(&self) -> [f64; 3] {
        [self.translation.x, self.translation.y, self.translation.z]
    }

    /// Rotation angle in radians.
    pub fn rotation_angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }

    #[inline]
    pub fn apply_xyz(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)] * p[0] + r[(0, 1)] * p[1] + r[(0, 2)] * p[2] + t.x,
            r[(1, 0)] * p[0] + r[(1, 1)] * p[1] + r[(1, 2)] * p[2] + t.y,
            r[(2, 0)] * p[0] + r[(2, 1)] * p[1] + r[(2, 2)] * p[2] + t.z,
        ]
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == Matrix3::identity() && self.translation == Vector3::zeros()
    }
}

/// Maps every point through `t`; attributes are kept.
pub fn apply_transform(cloud: &PointCloud, t: &RigidTransform) -> PointCloud {
    let pts = cloud
        .points()
        .iter()
        .map(|p| {
            let [x, y, z] = t.apply_xyz(p.xyz());
            Point3D { x, y, z, ..*p }
        })
        .collect();
    cloud.derive(pts)
}

/// Writes `# comment` lines, then R row by row, then t.
pub fn write_transform(path: &Path, t: &RigidTransform, comment: &str) -> Result<(), RegistrationError> {
    let mut s = String::new();
    for line in comment.lines() {
        let _ = writeln!(s, "# {line}");
    }
    for i in 0..3 {
        let r = &t.rotation;
        let _ = writeln!(s, "{} {} {}", r[(i, 0)], r[(i, 1)], r[(i, 2)]);
    }
    let _ = writeln!(s, "{} {} {}", t.translation.x, t.translation.y, t.translation.z);
    fs::write(path, s).map_err(|source| {
        CloudError::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

pub fn read_transform(path: &Path) -> Result<RigidTransform, RegistrationError> {
    let text = fs::read_to_string(path).map_err(|source| CloudError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut vals = Vec::with_capacity(12);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| CloudError::Parse {
                path: path.display().to_string(),
                location: format!("line {}", i + 1),
                message: format!("bad number '{tok}'"),
            })?;
            vals.push(v);
        }
    }
    if vals.len() != 12 {
        return Err(CloudError::Parse {
            path: path.display().to_string(),
            location: "end of file".into(),
            message: format!("expected 12 numbers, found {}", vals.len()),
        }
        .into());
    }
    let r = Matrix3::from_row_slice(&vals[..9]);
    RigidTransform::from_parts(r, Vector3::new(vals[9], vals[10], vals[11]))
}
