//! Synthetic multi-object depth scenes with exact ground truth.

mod shapes;

pub use shapes::{standard_models, standard_surfaces, Shape};

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vector3};
use crate::ingest::{CameraIntrinsics, ClassGrid, DepthImage, RawHeatmap};
use crate::model::ObjectModel;
use crate::render::{splat_radius, DepthRender, NO_OWNER};

/// Heatmap cell edge in pixels.
pub const HEATMAP_CELL: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    Fixed(RigidTransform),
    /// Viewpoint on a sphere around the object, uniform in-plane rotation.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    /// Index into the model list passed to [`render_scene`].
    pub model: usize,
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub objects: Vec<ObjectSpec>,
    pub intrinsics: CameraIntrinsics,
    pub width: u32,
    pub height: u32,
    /// Standard deviation of additive depth noise, meters.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Fronto-parallel backdrop, meters. `None` leaves empty pixels invalid.
    pub background_depth: Option<f64>,
    /// Radii of the viewpoint spheres for random placements, meters.
    pub view_radius: (f64, f64),
}

impl SceneSpec {
    /// 640×480 camera with common RGB-D intrinsics, 2 mm noise, backdrop at 1.3 m.
    pub fn desk(objects: Vec<ObjectSpec>, seed: u64) -> Self {
        Self {
            objects,
            intrinsics: CameraIntrinsics {
                fx: 572.4114,
                fy: 573.5704,
                cx: 325.2611,
                cy: 242.0490,
                depth_scale: 1e-4,
            },
            width: 640,
            height: 480,
            noise_sigma: 0.002,
            seed,
            background_depth: Some(1.3),
            view_radius: (0.7, 0.9),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::InvalidParameter("scene needs at least one object"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter("noise sigma must be >= 0"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("image must be non-empty"));
        }
        if !(self.view_radius.0 > 0.0 && self.view_radius.0 <= self.view_radius.1) {
            return Err(Error::InvalidParameter("view radius range is invalid"));
        }
        self.intrinsics.validate()
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTruth {
    pub class_id: String,
    pub pose: RigidTransform,
    /// Row-major indices of the pixels this object wins, ascending.
    pub mask: Vec<u32>,
    /// Tight bound of `mask`; `None` when fully occluded.
    pub bbox: Option<BBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub width: u32,
    pub height: u32,
    pub objects: Vec<ObjectTruth>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeatmapMode {
    Perfect,
    Blurred,
    /// Fraction of cells replaced by uniform noise.
    Corrupted(f64),
}

/// Renders the scene: z-buffered splats, per-pixel winners as visibility
/// masks, Gaussian noise on valid depths, 16-bit quantization.
pub fn render_scene(spec: &SceneSpec, models: &[ObjectModel]) -> Result<(DepthImage, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = &spec.intrinsics;
    let slots = slot_centers(spec.objects.len(), spec.width, spec.height);

    let mut poses = Vec::with_capacity(spec.objects.len());
    for (i, obj) in spec.objects.iter().enumerate() {
        let model = models
            .get(obj.model)
            .ok_or(Error::InvalidParameter("object references a missing model"))?;
        let pose = match obj.placement {
            Placement::Fixed(t) => {
                if !in_frustum(model, &t, spec) {
                    return Err(Error::ObjectOutOfFrustum { object: i });
                }
                t
            }
            Placement::Random => random_pose(model, spec, slots[i], &mut rng)
                .ok_or(Error::ObjectOutOfFrustum { object: i })?,
        };
        poses.push(pose);
    }

    let mut render = DepthRender::new(spec.width, spec.height);
    if let Some(bg) = spec.background_depth {
        render.fill_background(bg);
    }
    for (i, (obj, pose)) in spec.objects.iter().zip(&poses).enumerate() {
        let model = &models[obj.model];
        render.splat(&pose.apply(&model.cloud), splat_radius(&model.cloud), k, i as u32);
    }

    let mut objects: Vec<ObjectTruth> = spec
        .objects
        .iter()
        .zip(&poses)
        .map(|(obj, pose)| ObjectTruth {
            class_id: models[obj.model].id.clone(),
            pose: *pose,
            mask: Vec::new(),
            bbox: None,
        })
        .collect();
    for (idx, &owner) in render.owner.iter().enumerate() {
        if owner != NO_OWNER {
            objects[owner as usize].mask.push(idx as u32);
        }
    }
    for o in objects.iter_mut() {
        o.bbox = mask_bbox(&o.mask, spec.width);
    }

    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|_| Error::InvalidParameter("noise sigma"))?;
    let data = render
        .depth
        .iter()
        .map(|&z| {
            if z <= 0.0 {
                return 0;
            }
            let z = if spec.noise_sigma > 0.0 { z + noise.sample(&mut rng) } else { z };
            libm::round(z / k.depth_scale).clamp(1.0, u16::MAX as f64) as u16
        })
        .collect();
    Ok((
        DepthImage::new(spec.width, spec.height, data)?,
        GroundTruth {
            width: spec.width,
            height: spec.height,
            objects,
        },
    ))
}

pub fn mask_bbox(mask: &[u32], width: u32) -> Option<BBox> {
    let mut it = mask.iter().map(|&i| (i % width, i / width));
    let (x, y) = it.next()?;
    let mut b = BBox {
        x_min: x,
        y_min: y,
        x_max: x,
        y_max: y,
    };
    for (x, y) in it {
        b.x_min = b.x_min.min(x);
        b.x_max = b.x_max.max(x);
        b.y_min = b.y_min.min(y);
        b.y_max = b.y_max.max(y);
    }
    Some(b)
}

/// Image-plane anchor per object so that several objects rarely overlap.
fn slot_centers(n: usize, width: u32, height: u32) -> Vec<(f64, f64)> {
    let (cols, rows) = match n {
        0 | 1 => (1, 1),
        2 => (2, 1),
        3 | 4 => (2, 2),
        _ => {
            let c = libm::ceil(libm::sqrt(n as f64)) as usize;
            (c, n.div_ceil(c))
        }
    };
    (0..n)
        .map(|i| {
            let (c, r) = (i % cols, i / cols);
            (
                (c as f64 + 0.5) * width as f64 / cols as f64,
                (r as f64 + 0.5) * height as f64 / rows as f64,
            )
        })
        .collect()
}

fn random_pose(
    model: &ObjectModel,
    spec: &SceneSpec,
    slot: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Option<RigidTransform> {
    let k = &spec.intrinsics;
    let center = model.cloud.centroid()?.coords;
    let jitter_u = 0.08 * spec.width as f64;
    let jitter_v = 0.08 * spec.height as f64;
    for _ in 0..200 {
        // viewpoint direction uniform on the sphere
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let s = libm::sqrt(1.0 - z * z);
        let view = Vector3::new(s * libm::cos(phi), s * libm::sin(phi), z);
        let radius = rng.random_range(spec.view_radius.0..=spec.view_radius.1);
        let in_plane: f64 = rng.random_range(0.0..2.0 * PI);

        // camera axes expressed in the object frame; optical axis looks at the center
        let forward = -view;
        let helper = if forward.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
        let right = forward.cross(&helper).normalize();
        let down = forward.cross(&right);
        let cam_axes = Matrix3::from_columns(&[right, down, forward]);
        let spin = Rotation3::from_axis_angle(&Vector3::z_axis(), in_plane);
        let obj_to_cam = spin * Rotation3::from_matrix_unchecked(cam_axes.transpose());
        let rotation = UnitQuaternion::from_rotation_matrix(&obj_to_cam);

        let u = slot.0 + rng.random_range(-jitter_u..=jitter_u);
        let v = slot.1 + rng.random_range(-jitter_v..=jitter_v);
        let target = Vector3::new((u - k.cx) * radius / k.fx, (v - k.cy) * radius / k.fy, radius);
        let translation = target - rotation * center;
        let pose = RigidTransform::new(rotation, translation);
        if in_frustum(model, &pose, spec) {
            return Some(pose);
        }
    }
    None
}

fn in_frustum(model: &ObjectModel, pose: &RigidTransform, spec: &SceneSpec) -> bool {
    let k = &spec.intrinsics;
    let margin = 2.0;
    model.cloud.points.iter().all(|p| {
        let q = pose.transform_point(p);
        if q.z <= 0.05 {
            return false;
        }
        if let Some(bg) = spec.background_depth {
            if q.z >= bg {
                return false;
            }
        }
        let (u, v) = k.project(&q);
        u >= margin && v >= margin && u <= spec.width as f64 - 1.0 - margin && v <= spec.height as f64 - 1.0 - margin
    })
}

/// Heatmap grid size for an image: one cell per 32×32 pixel block.
pub fn heatmap_dims(width: u32, height: u32) -> (u32, u32) {
    (width.div_ceil(HEATMAP_CELL), height.div_ceil(HEATMAP_CELL))
}

/// Synthetic class heatmaps derived from the visibility masks, one grid per
/// class present.
///
/// `Perfect` is the per-cell occupancy fraction of each object's mask;
/// `Blurred` convolves it with a normalized 3×3 box (zero padded);
/// `Corrupted(p)` overwrites a seeded fraction `p` of cells with uniform noise.
pub fn ground_truth_heatmap(gt: &GroundTruth, mode: HeatmapMode, seed: u64) -> RawHeatmap {
    let (w, h) = heatmap_dims(gt.width, gt.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // one grid per class, in order of first appearance; masks are disjoint
    let mut merged: Vec<(String, Vec<f64>)> = Vec::new();
    for o in &gt.objects {
        let occ = occupancy(o, gt.width, gt.height, w, h);
        match merged.iter_mut().find(|(id, _)| *id == o.class_id) {
            Some((_, acc)) => acc.iter_mut().zip(occ).for_each(|(a, b)| *a += b),
            None => merged.push((o.class_id.clone(), occ)),
        }
    }
    let classes = merged
        .into_iter()
        .map(|(class_id, perfect)| {
            let values = match mode {
                HeatmapMode::Perfect => perfect,
                HeatmapMode::Blurred => box_blur(&perfect, w, h),
                HeatmapMode::Corrupted(p) => {
                    let mut v = perfect;
                    let n = v.len();
                    let count = libm::round(p.clamp(0.0, 1.0) * n as f64) as usize;
                    for cell in index::sample(&mut rng, n, count) {
                        v[cell] = rng.random::<f64>();
                    }
                    v
                }
            };
            ClassGrid { class_id, values }
        })
        .collect();
    RawHeatmap {
        width: w,
        height: h,
        classes,
    }
}

fn occupancy(o: &ObjectTruth, width: u32, height: u32, w: u32, h: u32) -> Vec<f64> {
    let mut counts = alloc::vec![0u32; (w * h) as usize];
    for &idx in &o.mask {
        let (x, y) = (idx % width, idx / width);
        counts[((y / HEATMAP_CELL) * w + x / HEATMAP_CELL) as usize] += 1;
    }
    (0..h)
        .flat_map(|cy| (0..w).map(move |cx| (cx, cy)))
        .map(|(cx, cy)| {
            let cw = (width - cx * HEATMAP_CELL).min(HEATMAP_CELL);
            let ch = (height - cy * HEATMAP_CELL).min(HEATMAP_CELL);
            counts[(cy * w + cx) as usize] as f64 / (cw * ch) as f64
        })
        .collect()
}

fn box_blur(v: &[f64], w: u32, h: u32) -> Vec<f64> {
    let (w, h) = (w as i64, h as i64);
    let mut out = alloc::vec![0.0; v.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && nx < w && ny < h {
                        acc += v[(ny * w + nx) as usize];
                    }
                }
            }
            out[(y * w + x) as usize] = acc / 9.0;
        }
    }
    out
}
