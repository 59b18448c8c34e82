//! Pose and detection metrics: ADD, ADD-S, accuracy-threshold AUC, visible
//! surface discrepancy, and point-wise heatmap localization.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, SpatialIndex};
use crate::ingest::{CameraIntrinsics, DepthImage, ProbabilityHeatmap};
use crate::model::ObjectModel;
use crate::render::{render_cloud, splat_radius};
pub use crate::simulator::BBox;

/// Largest threshold of the accuracy curve, meters.
pub const AUC_MAX_THRESHOLD: f64 = 0.1;
pub const AUC_BINS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseError {
    pub add: f64,
    pub add_s: f64,
}

/// Mean distance between model points under `gt` and under `pred`.
pub fn add_error(gt: &RigidTransform, pred: &RigidTransform, model: &ObjectModel) -> f64 {
    let pts = &model.cloud.points;
    let sum: f64 = pts
        .iter()
        .map(|m| (gt.transform_point(m) - pred.transform_point(m)).norm())
        .sum();
    sum / pts.len() as f64
}

/// Mean over `gt`-placed model points of the distance to the closest
/// `pred`-placed model point.
pub fn add_s_error(gt: &RigidTransform, pred: &RigidTransform, model: &ObjectModel) -> f64 {
    let placed: Vec<_> = model.cloud.points.iter().map(|m| pred.transform_point(m)).collect();
    let Ok(index) = SpatialIndex::from_points(&placed) else {
        return 0.0;
    };
    let sum: f64 = model
        .cloud
        .points
        .iter()
        .map(|m| index.nearest(&gt.transform_point(m)).1)
        .sum();
    sum / placed.len() as f64
}

pub fn pose_error(gt: &RigidTransform, pred: &RigidTransform, model: &ObjectModel) -> PoseError {
    PoseError {
        add: add_error(gt, pred, model),
        add_s: add_s_error(gt, pred, model),
    }
}

/// Correct when ADD is strictly below `fraction` of the model diameter.
pub fn pose_correct_add(gt: &RigidTransform, pred: &RigidTransform, model: &ObjectModel, fraction: f64) -> bool {
    add_error(gt, pred, model) < fraction * model.diameter
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCurve {
    /// Ascending, meters.
    pub thresholds: Vec<f64>,
    pub accuracies: Vec<f64>,
}

/// Share of `errors` strictly below each of `bins` evenly spaced thresholds
/// up to `max_threshold`. Missing poses can be passed as `f64::INFINITY`.
pub fn accuracy_curve(errors: &[f64], max_threshold: f64, bins: usize) -> AccuracyCurve {
    let thresholds: Vec<f64> = (1..=bins).map(|k| max_threshold * k as f64 / bins as f64).collect();
    let accuracies = thresholds
        .iter()
        .map(|&t| {
            if errors.is_empty() {
                0.0
            } else {
                errors.iter().filter(|&&e| e < t).count() as f64 / errors.len() as f64
            }
        })
        .collect();
    AccuracyCurve {
        thresholds,
        accuracies,
    }
}

/// Trapezoidal area under the curve over `[0, max_threshold]`, normalized.
/// The first accuracy is held constant down to zero threshold.
pub fn auc(curve: &AccuracyCurve, max_threshold: f64) -> Result<f64> {
    let t = &curve.thresholds;
    let a = &curve.accuracies;
    if t.is_empty() || t.len() != a.len() {
        return Err(Error::InvalidParameter("curve needs matching, non-empty thresholds and accuracies"));
    }
    if !(t[0] > 0.0) || t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("thresholds must be positive and ascending"));
    }
    let last = t[t.len() - 1];
    if (last - max_threshold).abs() > 1e-9 * max_threshold {
        return Err(Error::InvalidParameter("thresholds must end at the maximum threshold"));
    }
    let mut area = t[0] * a[0];
    let mut width = t[0];
    for k in 1..t.len() {
        let w = t[k] - t[k - 1];
        area += w * 0.5 * (a[k] + a[k - 1]);
        width += w;
    }
    Ok((area / width).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VsdParams {
    pub tau: f64,
    pub theta: f64,
    /// Every `stride`-th pixel in each direction is evaluated.
    pub stride: u32,
    /// Surfel radius for rendering the model; defaults to its mean point spacing.
    pub splat_radius: Option<f64>,
}

impl Default for VsdParams {
    fn default() -> Self {
        Self {
            tau: 0.02,
            theta: 0.3,
            stride: 1,
            splat_radius: None,
        }
    }
}

impl VsdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !(self.theta > 0.0 && self.theta < 1.0) || self.stride == 0 {
            return Err(Error::InvalidParameter("VSD needs tau > 0, theta in (0, 1), stride >= 1"));
        }
        Ok(())
    }
}

/// Visible surface discrepancy between renders of the model at `gt` and
/// `pred`.
///
/// A rendered pixel is visible when the scene has no valid depth there or
/// the rendered depth is at most scene depth + τ. Over the union of both
/// visibility masks, a pixel counts as an error when only one render covers
/// it or the two depths differ by τ or more.
pub fn vsd_error(
    gt: &RigidTransform,
    pred: &RigidTransform,
    model: &ObjectModel,
    depth: &DepthImage,
    k: &CameraIntrinsics,
    params: &VsdParams,
) -> Result<f64> {
    params.validate()?;
    k.validate()?;
    let radius = params.splat_radius.unwrap_or_else(|| splat_radius(&model.cloud));
    let (w, h) = (depth.width, depth.height);
    let r_gt = render_cloud(&model.cloud, gt, radius, k, w, h);
    let r_pred = render_cloud(&model.cloud, pred, radius, k, w, h);
    let visible = |d: f64, u: u32, v: u32| d > 0.0 && depth.meters(u, v, k).is_none_or(|s| d <= s + params.tau);
    let mut union = 0usize;
    let mut wrong = 0usize;
    let mut gt_visible = 0usize;
    for v in (0..h).step_by(params.stride as usize) {
        for u in (0..w).step_by(params.stride as usize) {
            let i = (v * w + u) as usize;
            let (dg, dp) = (r_gt.depth[i], r_pred.depth[i]);
            let vg = visible(dg, u, v);
            let vp = visible(dp, u, v);
            gt_visible += vg as usize;
            if !(vg || vp) {
                continue;
            }
            union += 1;
            if (dg > 0.0) != (dp > 0.0) || (dg - dp).abs() >= params.tau {
                wrong += 1;
            }
        }
    }
    if gt_visible == 0 {
        return Err(Error::NotVisible);
    }
    Ok(wrong as f64 / union as f64)
}

/// Whether the heatmap peak of `class_id` falls inside `bbox` expanded by one
/// heatmap cell on every side. The peak is the first maximal cell in
/// row-major order, mapped to its center pixel.
pub fn pointwise_localization(heatmap: &ProbabilityHeatmap, class_id: &str, bbox: &BBox) -> Result<bool> {
    let grid = heatmap.class(class_id)?;
    let mut best = 0;
    for (i, &v) in grid.values.iter().enumerate() {
        if v > grid.values[best] {
            best = i;
        }
    }
    let s = heatmap.scale_factor;
    let cx = (best as u32 % heatmap.width) as f64;
    let cy = (best as u32 / heatmap.width) as f64;
    let (px, py) = (s * cx + s / 2.0, s * cy + s / 2.0);
    Ok(px >= bbox.x_min as f64 - s
        && px <= bbox.x_max as f64 + s
        && py >= bbox.y_min as f64 - s
        && py <= bbox.y_max as f64 + s)
}
