use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{Point3, PointCloud, UnitVector3};

/// Rotation (unit quaternion) followed by a translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    /// Builds a transform from an axis-angle vector (radians) and a translation.
    pub fn from_axis_angle(axis_angle: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::from_scaled_axis(axis_angle), translation)
    }

    /// Quaternion components in `[w, x, y, z]` order, renormalized.
    pub fn from_wxyz(q: [f64; 4], translation: [f64; 3]) -> Self {
        let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
        Self::new(
            UnitQuaternion::from_quaternion(quat),
            Vector3::new(translation[0], translation[1], translation[2]),
        )
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    #[inline]
    pub fn transform_point(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    #[inline]
    pub fn transform_normal(&self, n: &UnitVector3) -> UnitVector3 {
        UnitVector3::new_unchecked(self.rotation * n.into_inner())
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let rotation = self.rotation * other.rotation;
        RigidTransform {
            rotation: UnitQuaternion::new_normalize(rotation.into_inner()),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rotation = self.rotation.inverse();
        RigidTransform {
            rotation,
            translation: -(rotation * self.translation),
        }
    }

    /// Rotation angle of `self⁻¹ ∘ other` in radians.
    pub fn angle_to(&self, other: &RigidTransform) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        apply_transform(self, cloud)
    }
}

/// Rotates then translates every point; normals are rotated only.
pub fn apply_transform(t: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| t.transform_point(p)).collect(),
        normals: cloud.normals.iter().map(|n| t.transform_normal(n)).collect(),
        pixels: cloud.pixels.clone(),
    }
}

pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}
