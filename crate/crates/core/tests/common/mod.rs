#![allow(dead_code)]

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stocs_core::geometry::{Point3, PointCloud, RigidTransform, UnitVector3};

pub fn random_unit<R: Rng>(rng: &mut R) -> UnitVector3 {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return UnitVector3::new_normalize(v);
        }
    }
}

pub fn random_rotation<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    let axis = random_unit(rng);
    UnitQuaternion::from_axis_angle(&axis, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
}

pub fn random_transform<R: Rng>(rng: &mut R, reach: f64) -> RigidTransform {
    RigidTransform::new(
        random_rotation(rng),
        Vector3::new(
            rng.random_range(-reach..reach),
            rng.random_range(-reach..reach),
            rng.random_range(-reach..reach),
        ),
    )
}

pub fn random_oriented_cloud(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> PointCloud {
    let points = (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(0.0..extent),
                rng.random_range(0.0..extent),
                rng.random_range(0.0..extent),
            )
        })
        .collect();
    let normals = (0..n).map(|_| random_unit(rng)).collect();
    PointCloud::with_normals(points, normals).unwrap()
}

/// Mean distance between corresponding transformed points, by direct loop.
pub fn mean_displacement(points: &[Point3], a: &RigidTransform, b: &RigidTransform) -> f64 {
    let mut sum = 0.0;
    for p in points {
        sum += (a.transform_point(p) - b.transform_point(p)).norm();
    }
    sum / points.len() as f64
}
