//! Procedural test objects: unions of axis-aligned boxes, sampled on their
//! outer surface with outward normals. None has a proper rotational symmetry.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Result;
use crate::geometry::{Point3, PointCloud, UnitVector3, Vector3};
use crate::model::{build_model, ObjectModel, PpfSteps, PpfTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    LBracket,
    Tee,
    Stairs,
    Drill,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::LBracket, Shape::Tee, Shape::Stairs, Shape::Drill];

    pub fn name(&self) -> &'static str {
        match self {
            Shape::LBracket => "l_bracket",
            Shape::Tee => "tee",
            Shape::Stairs => "stairs",
            Shape::Drill => "drill",
        }
    }

    /// Boxes as `(min, max)` corners, meters.
    fn boxes(&self) -> Vec<([f64; 3], [f64; 3])> {
        match self {
            Shape::LBracket => alloc::vec![
                ([0.0, 0.0, 0.0], [0.12, 0.03, 0.06]),
                ([0.0, 0.02, 0.0], [0.03, 0.10, 0.06]),
            ],
            Shape::Tee => alloc::vec![
                ([0.04, 0.0, 0.0], [0.07, 0.11, 0.03]),
                ([0.0, 0.10, 0.0], [0.14, 0.14, 0.05]),
            ],
            Shape::Stairs => alloc::vec![
                ([0.0, 0.0, 0.0], [0.15, 0.06, 0.04]),
                ([0.0, 0.0, 0.03], [0.09, 0.04, 0.08]),
                ([0.0, 0.0, 0.07], [0.04, 0.025, 0.12]),
            ],
            Shape::Drill => alloc::vec![
                ([0.0, 0.0, 0.0], [0.16, 0.05, 0.06]),
                ([0.10, 0.01, -0.10], [0.14, 0.04, 0.01]),
                ([-0.04, 0.015, 0.02], [0.01, 0.035, 0.04]),
            ],
        }
    }

    /// Surface samples on a grid of the given spacing, centered on the
    /// bounding-box center.
    pub fn sample(&self, spacing: f64) -> PointCloud {
        let boxes = self.boxes();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for (a, b) in &boxes {
            for k in 0..3 {
                lo[k] = lo[k].min(a[k]);
                hi[k] = hi[k].max(b[k]);
            }
        }
        let center = Vector3::new((lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0);
        let eps = spacing * 1e-3;
        let inside_other = |p: &Point3, skip: usize| {
            boxes.iter().enumerate().any(|(i, (a, b))| {
                i != skip && (0..3).all(|k| p[k] > a[k] + eps && p[k] < b[k] - eps)
            })
        };
        let mut points = Vec::new();
        let mut normals = Vec::new();
        for (bi, (a, b)) in boxes.iter().enumerate() {
            for axis in 0..3 {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                let nu = steps(b[u] - a[u], spacing);
                let nv = steps(b[v] - a[v], spacing);
                for (side, coord) in [(-1.0, a[axis]), (1.0, b[axis])] {
                    for i in 0..=nu {
                        for j in 0..=nv {
                            let mut p = [0.0; 3];
                            p[axis] = coord;
                            p[u] = a[u] + (b[u] - a[u]) * i as f64 / nu as f64;
                            p[v] = a[v] + (b[v] - a[v]) * j as f64 / nv as f64;
                            let p = Point3::new(p[0], p[1], p[2]);
                            if inside_other(&p, bi) {
                                continue;
                            }
                            let mut n = Vector3::zeros();
                            n[axis] = side;
                            points.push(p - center);
                            normals.push(UnitVector3::new_unchecked(n));
                        }
                    }
                }
            }
        }
        PointCloud {
            points,
            normals,
            pixels: Vec::new(),
        }
    }

    /// Model with default feature steps for its diameter.
    pub fn model(&self, sample_spacing: f64, voxel: f64) -> Result<ObjectModel> {
        let dense = self.sample(sample_spacing);
        let diameter = dense.diameter();
        build_model(&dense, voxel, PpfSteps::for_diameter(diameter), String::from(self.name()))
    }
}

impl Shape {
    /// Dense surface for rendering only: the full grid sample with an empty
    /// feature table. Shares the frame of [`Shape::model`].
    pub fn surface(&self, spacing: f64) -> ObjectModel {
        let cloud = self.sample(spacing);
        let diameter = cloud.diameter();
        ObjectModel {
            id: String::from(self.name()),
            cloud,
            ppf: PpfTable::new(PpfSteps::for_diameter(diameter)),
            diameter,
        }
    }
}

/// Render surfaces of the four standard shapes.
pub fn standard_surfaces(spacing: f64) -> Vec<ObjectModel> {
    Shape::ALL.iter().map(|s| s.surface(spacing)).collect()
}

fn steps(len: f64, spacing: f64) -> usize {
    (libm::ceil(len / spacing) as usize).max(1)
}

/// The four standard shapes as models.
pub fn standard_models(sample_spacing: f64, voxel: f64) -> Result<Vec<ObjectModel>> {
    Shape::ALL.iter().map(|s| s.model(sample_spacing, voxel)).collect()
}
