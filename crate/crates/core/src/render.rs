//! Z-buffered surfel splatting of oriented point clouds.
//!
//! Each point is a disk of fixed radius in its tangent plane. A pixel covered
//! by the disk receives the depth where the pixel ray meets that plane.
//! Back-facing surfels are culled.

use alloc::vec::Vec;

use crate::geometry::{PointCloud, RigidTransform, SpatialIndex, Vector3};
use crate::ingest::CameraIntrinsics;

pub const NO_OWNER: u32 = u32::MAX;

/// Depth (meters, 0 = empty) and the id of the surface that won each pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRender {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
    pub owner: Vec<u32>,
}

impl DepthRender {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            depth: alloc::vec![0.0; n],
            owner: alloc::vec![NO_OWNER; n],
        }
    }

    /// Fills every pixel with a fronto-parallel plane at `depth`, no owner.
    pub fn fill_background(&mut self, depth: f64) {
        self.depth.iter_mut().for_each(|d| *d = depth);
    }

    #[inline]
    fn offer(&mut self, idx: usize, z: f64, owner: u32) {
        let cur = self.depth[idx];
        if z > 0.0 && (cur == 0.0 || z < cur) {
            self.depth[idx] = z;
            self.owner[idx] = owner;
        }
    }

    /// Splats a camera-frame cloud.
    pub fn splat(&mut self, cloud: &PointCloud, radius: f64, k: &CameraIntrinsics, owner: u32) {
        let oriented = cloud.has_normals();
        let r2 = radius * radius;
        for (i, p) in cloud.points.iter().enumerate() {
            if p.z <= 1e-6 {
                continue;
            }
            let n: Option<Vector3> = oriented.then(|| cloud.normals[i].into_inner());
            if let Some(n) = n {
                if n.dot(&p.coords) > 0.0 {
                    continue;
                }
            }
            let (u0, v0) = k.project(p);
            let ru = radius * k.fx / p.z + 1.0;
            let rv = radius * k.fy / p.z + 1.0;
            let u_lo = libm::floor(u0 - ru).max(0.0) as i64;
            let u_hi = (libm::ceil(u0 + ru) as i64).min(self.width as i64 - 1);
            let v_lo = libm::floor(v0 - rv).max(0.0) as i64;
            let v_hi = (libm::ceil(v0 + rv) as i64).min(self.height as i64 - 1);
            for v in v_lo..=v_hi {
                for u in u_lo..=u_hi {
                    let ray = Vector3::new((u as f64 - k.cx) / k.fx, (v as f64 - k.cy) / k.fy, 1.0);
                    let z = match n {
                        Some(n) if n.dot(&ray).abs() > 1e-3 => n.dot(&p.coords) / n.dot(&ray),
                        _ => p.z,
                    };
                    if (ray * z - p.coords).norm_squared() > r2 {
                        continue;
                    }
                    self.offer(v as usize * self.width as usize + u as usize, z, owner);
                }
            }
        }
    }
}

/// Splat radius matching the sampling density of `cloud`: its mean
/// nearest-neighbor spacing.
pub fn splat_radius(cloud: &PointCloud) -> f64 {
    let Ok(index) = SpatialIndex::build(cloud) else {
        return 0.0;
    };
    if cloud.len() < 2 {
        return 0.0;
    }
    let total: f64 = cloud
        .points
        .iter()
        .map(|p| index.knn(p, 2).get(1).map_or(0.0, |e| e.1))
        .sum();
    total / cloud.len() as f64
}

/// Depth map of `cloud` placed at `pose`.
pub fn render_cloud(
    cloud: &PointCloud,
    pose: &RigidTransform,
    radius: f64,
    k: &CameraIntrinsics,
    width: u32,
    height: u32,
) -> DepthRender {
    let mut out = DepthRender::new(width, height);
    out.splat(&pose.apply(cloud), radius, k, 0);
    out
}
