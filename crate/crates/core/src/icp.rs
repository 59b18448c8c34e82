//! Local pose refinement by iterative closest points.

use alloc::vec::Vec;
use hashbrown::HashMap;
use nalgebra::{Matrix6, UnitQuaternion, Vector6};

use crate::error::{Error, Result};
use crate::geometry::{best_rigid_alignment, Point3, RigidTransform, SpatialIndex, UnitVector3, Vector3};
use crate::model::ObjectModel;
use crate::render::splat_radius;

/// Share of model points that must find a correspondence at the initial pose.
pub const MIN_OVERLAP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IcpMode {
    #[default]
    PointToPoint,
    /// Needs scene normals.
    PointToPlane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Correspondences at or beyond this distance are ignored, meters.
    pub cutoff: f64,
    /// Stop once the mean correspondence distance changes by less, meters.
    pub convergence: f64,
    pub mode: IcpMode,
    /// Skip model points a camera at the origin cannot see: those whose
    /// normal faces away, and those behind other model points on the same
    /// viewing ray. Worth enabling for single-view depth scenes.
    pub cull_hidden: bool,
}

impl IcpConfig {
    /// 50 iterations, cutoff `2 δ_s`, convergence 1e-5 m, point-to-point,
    /// no culling.
    pub fn for_delta_s(delta_s: f64) -> Self {
        Self {
            max_iterations: 50,
            cutoff: 2.0 * delta_s,
            convergence: 1e-5,
            mode: IcpMode::PointToPoint,
            cull_hidden: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.cutoff > 0.0) || !(self.convergence > 0.0) {
            return Err(Error::InvalidParameter("ICP parameters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpReport {
    pub transform: RigidTransform,
    /// Mean correspondence distance at the initial pose and after every
    /// accepted iteration; non-increasing.
    pub history: Vec<f64>,
    /// Iterations attempted, including a final rejected one.
    pub iterations: usize,
    pub converged: bool,
}

struct Matches {
    model: Vec<Point3>,
    scene: Vec<usize>,
    /// Mean over unculled model points of the neighbor distance, capped at
    /// the cutoff; unmatched points count as the cutoff.
    mean: f64,
}

/// Which placed points survive back-face and self-occlusion culling. Points
/// are binned by viewing direction in cells about two point spacings wide;
/// a point is hidden when it lies more than two spacings behind the
/// nearest point of its cell.
fn visible_points(t: &RigidTransform, model: &ObjectModel, placed: &[Point3], spacing: f64) -> Vec<bool> {
    let mut keep: Vec<bool> = placed
        .iter()
        .enumerate()
        .map(|(i, q)| q.z > 0.0 && (!model.cloud.has_normals() || t.transform_normal(&model.cloud.normals[i]).dot(&q.coords) <= 0.0))
        .collect();
    if !(spacing > 0.0) {
        return keep;
    }
    let kept = keep.iter().filter(|&&k| k).count().max(1);
    let mean_z = placed.iter().zip(&keep).filter(|(_, &k)| k).map(|(q, _)| q.z).sum::<f64>() / kept as f64;
    let cell = 2.0 * spacing / mean_z;
    let key = |q: &Point3| (libm::floor(q.x / q.z / cell) as i64, libm::floor(q.y / q.z / cell) as i64);
    let mut front: HashMap<(i64, i64), f64> = HashMap::new();
    for (q, _) in placed.iter().zip(&keep).filter(|(_, &k)| k) {
        let z = front.entry(key(q)).or_insert(f64::INFINITY);
        *z = z.min(q.z);
    }
    for (q, k) in placed.iter().zip(keep.iter_mut()) {
        if *k && q.z > front[&key(q)] + 2.0 * spacing {
            *k = false;
        }
    }
    keep
}

fn correspond(t: &RigidTransform, model: &ObjectModel, index: &SpatialIndex, cfg: &IcpConfig, spacing: f64) -> Matches {
    let placed: Vec<Point3> = model.cloud.points.iter().map(|p| t.transform_point(p)).collect();
    let keep = if cfg.cull_hidden {
        visible_points(t, model, &placed, spacing)
    } else {
        alloc::vec![true; placed.len()]
    };
    let mut m = Matches {
        model: Vec::new(),
        scene: Vec::new(),
        mean: 0.0,
    };
    let mut sum = 0.0;
    let mut considered = 0usize;
    for (i, (p, q)) in model.cloud.points.iter().zip(&placed).enumerate() {
        if !keep[i] {
            continue;
        }
        considered += 1;
        match index.nearest_within(q, cfg.cutoff) {
            Some((j, d)) => {
                m.model.push(*p);
                m.scene.push(j);
                sum += d;
            }
            None => sum += cfg.cutoff,
        }
    }
    if considered > 0 {
        m.mean = sum / considered as f64;
    }
    m
}

/// Point-to-point ICP from `initial`; see [`refine_detailed`].
pub fn refine(initial: &RigidTransform, model: &ObjectModel, scene_index: &SpatialIndex, cfg: &IcpConfig) -> Result<RigidTransform> {
    refine_detailed(initial, model, scene_index, None, cfg).map(|r| r.transform)
}

/// Alternates nearest-neighbor correspondence and re-alignment. A step that
/// would raise the mean correspondence distance is halved, up to four
/// times, and otherwise ends the loop, so the objective never degrades.
pub fn refine_detailed(
    initial: &RigidTransform,
    model: &ObjectModel,
    scene_index: &SpatialIndex,
    scene_normals: Option<&[UnitVector3]>,
    cfg: &IcpConfig,
) -> Result<IcpReport> {
    cfg.validate()?;
    if model.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if cfg.mode == IcpMode::PointToPlane && scene_normals.is_none_or(|n| n.len() != scene_index.len()) {
        return Err(Error::InvalidParameter("point-to-plane ICP needs one normal per scene point"));
    }
    let spacing = if cfg.cull_hidden { splat_radius(&model.cloud) } else { 0.0 };
    let mut t = *initial;
    let mut cur = correspond(&t, model, scene_index, cfg, spacing);
    let required = libm::ceil(MIN_OVERLAP * model.len() as f64) as usize;
    if cur.scene.len() < required {
        return Err(Error::InsufficientOverlap {
            matched: cur.scene.len(),
            required,
        });
    }
    let mut report = IcpReport {
        transform: t,
        history: alloc::vec![cur.mean],
        iterations: 0,
        converged: false,
    };
    let center = centroid(&model.cloud.points);
    'outer: for _ in 0..cfg.max_iterations {
        report.iterations += 1;
        let step = match cfg.mode {
            IcpMode::PointToPoint => {
                let dst: Vec<Point3> = cur.scene.iter().map(|&j| *scene_index.point(j)).collect();
                best_rigid_alignment(&cur.model, &dst)
            }
            IcpMode::PointToPlane => point_to_plane_step(&t, &cur, scene_index, scene_normals.unwrap_or(&[])),
        };
        let Ok(full) = step else {
            break;
        };
        // halve a step that raises the mean until it does not
        let mut fraction = 1.0;
        let (next_t, next) = loop {
            let cand = interpolate(&t, &full, fraction, &center);
            let next = correspond(&cand, model, scene_index, cfg, spacing);
            if next.scene.len() >= 3 && next.mean <= cur.mean {
                break (cand, next);
            }
            fraction *= 0.5;
            if fraction < 1.0 / 16.0 {
                break 'outer;
            }
        };
        let change = cur.mean - next.mean;
        t = next_t;
        cur = next;
        report.history.push(cur.mean);
        if change < cfg.convergence {
            report.converged = true;
            break;
        }
    }
    report.transform = t;
    Ok(report)
}

fn centroid(points: &[Point3]) -> Point3 {
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / points.len() as f64)
}

/// Pose a `fraction` of the way from `a` to `b`, rotating about `center`
/// given in model coordinates.
fn interpolate(a: &RigidTransform, b: &RigidTransform, fraction: f64, center: &Point3) -> RigidTransform {
    if fraction == 1.0 {
        return *b;
    }
    let ca = a.transform_point(center);
    let cb = b.transform_point(center);
    let rotation = a.rotation.slerp(&b.rotation, fraction);
    let c = ca + (cb - ca) * fraction;
    RigidTransform::new(rotation, c.coords - rotation * center.coords)
}

/// One linearized point-to-plane update, composed onto `t`.
fn point_to_plane_step(t: &RigidTransform, m: &Matches, index: &SpatialIndex, normals: &[UnitVector3]) -> Result<RigidTransform> {
    let mut ata = Matrix6::<f64>::zeros();
    let mut atb = Vector6::<f64>::zeros();
    for (p, &j) in m.model.iter().zip(&m.scene) {
        let p = t.transform_point(p);
        let q = index.point(j);
        let n = normals[j].into_inner();
        let c = p.coords.cross(&n);
        let row = Vector6::new(c.x, c.y, c.z, n.x, n.y, n.z);
        let r = (p - q).dot(&n);
        ata += row * row.transpose();
        atb -= row * r;
    }
    let x = ata.cholesky().ok_or(Error::DegenerateConfiguration)?.solve(&atb);
    let delta = RigidTransform::new(
        UnitQuaternion::from_scaled_axis(Vector3::new(x[0], x[1], x[2])),
        Vector3::new(x[3], x[4], x[5]),
    );
    Ok(delta.compose(t))
}
