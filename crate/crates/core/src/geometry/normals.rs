use alloc::vec::Vec;
use nalgebra::{Matrix3, Vector3};

use super::{Point3, PointCloud, SpatialIndex, UnitVector3};
use crate::error::{Error, Result};

/// Relative eigenvalue floor under which a neighborhood is treated as rank < 2.
const RANK_EPS: f64 = 1e-12;

/// PCA normals from the `k` nearest neighbors, oriented toward `viewpoint`.
///
/// Neighborhoods whose covariance has rank < 2 (coincident or collinear
/// samples, common with quantized depth) get the unit direction toward the
/// viewpoint instead of an error.
pub fn estimate_normals(cloud: &PointCloud, k: usize, viewpoint: &Point3) -> Result<PointCloud> {
    if k < 3 {
        return Err(Error::InvalidParameter("normal estimation needs k >= 3"));
    }
    if cloud.len() < k + 1 {
        return Err(Error::TooFewPoints {
            needed: k + 1,
            got: cloud.len(),
        });
    }
    let index = SpatialIndex::build(cloud)?;
    let normals: Vec<UnitVector3> = cloud
        .points
        .iter()
        .map(|p| {
            let neigh = index.knn(p, k + 1);
            normal_from_neighbors(&index, &neigh, p, viewpoint)
        })
        .collect();
    Ok(PointCloud {
        points: cloud.points.clone(),
        normals,
        pixels: cloud.pixels.clone(),
    })
}

fn normal_from_neighbors(
    index: &SpatialIndex,
    neigh: &[(usize, f64)],
    p: &Point3,
    viewpoint: &Point3,
) -> UnitVector3 {
    let n = neigh.len() as f64;
    let mean = neigh
        .iter()
        .fold(Vector3::zeros(), |a, &(i, _)| a + index.point(i).coords)
        / n;
    let mut cov = Matrix3::zeros();
    for &(i, _) in neigh {
        let d = index.point(i).coords - mean;
        cov += d * d.transpose();
    }
    let to_view = viewpoint - p;
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_unstable_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let largest = eig.eigenvalues[order[2]];
    let middle = eig.eigenvalues[order[1]];
    if !(largest > 0.0) || middle <= RANK_EPS * largest {
        return toward(to_view);
    }
    let normal: Vector3<f64> = eig.eigenvectors.column(order[0]).into_owned();
    let normal = if normal.dot(&to_view) < 0.0 { -normal } else { normal };
    UnitVector3::new_normalize(normal)
}

fn toward(dir: Vector3<f64>) -> UnitVector3 {
    if dir.norm() > 0.0 {
        UnitVector3::new_normalize(dir)
    } else {
        UnitVector3::new_unchecked(Vector3::z())
    }
}
