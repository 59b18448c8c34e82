use alloc::vec::Vec;

use super::{is_finite_point, Pixel, Point3, UnitVector3};
use crate::error::{Error, Result};

/// Ordered point set with optional per-point normals and source pixels.
///
/// `normals` and `pixels` are either empty or as long as `points`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub normals: Vec<UnitVector3>,
    pub pixels: Vec<Pixel>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point3>) -> Result<Self> {
        if points.iter().any(|p| !is_finite_point(p)) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            points,
            normals: Vec::new(),
            pixels: Vec::new(),
        })
    }

    pub fn with_normals(points: Vec<Point3>, normals: Vec<UnitVector3>) -> Result<Self> {
        let mut cloud = Self::from_points(points)?;
        if !normals.is_empty() && normals.len() != cloud.points.len() {
            return Err(Error::LengthMismatch {
                expected: cloud.points.len(),
                got: normals.len(),
            });
        }
        if normals
            .iter()
            .any(|n| (n.norm() - 1.0).abs() > 1e-6 || !n.iter().all(|c| c.is_finite()))
        {
            return Err(Error::NonFinite);
        }
        cloud.normals = normals;
        Ok(cloud)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn has_normals(&self) -> bool {
        !self.normals.is_empty() && self.normals.len() == self.points.len()
    }

    #[inline]
    pub fn has_pixels(&self) -> bool {
        !self.pixels.is_empty() && self.pixels.len() == self.points.len()
    }

    /// Keeps the entries at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: if self.has_normals() {
                indices.iter().map(|&i| self.normals[i]).collect()
            } else {
                Vec::new()
            },
            pixels: if self.has_pixels() {
                indices.iter().map(|&i| self.pixels[i]).collect()
            } else {
                Vec::new()
            },
        }
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }

    /// Exact maximum pairwise distance (quadratic).
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.max((a - b).norm_squared());
            }
        }
        libm::sqrt(best)
    }
}
