//! Points, normals, rigid transforms, and the nearest-neighbor index.
//!
//! All lengths are meters. Conversions from sensor units happen at ingestion.

mod align;
mod cloud;
mod index;
mod normals;
mod transform;

pub use align::best_rigid_alignment;
pub use cloud::PointCloud;
pub use index::{build_index, SpatialIndex};
pub use normals::estimate_normals;
pub use transform::{apply_transform, compose, RigidTransform};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
pub type UnitVector3 = nalgebra::Unit<nalgebra::Vector3<f64>>;

/// Source pixel `(u, v)` of a back-projected point.
pub type Pixel = (u32, u32);

#[inline]
pub(crate) fn is_finite_point(p: &Point3) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.z.is_finite()
}
