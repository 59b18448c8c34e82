//! Glue between file inputs and the estimator: guided scene construction,
//! parallel trials, depth-based refinement and scene simulation.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use stocs_core::geometry::{PointCloud, RigidTransform, SpatialIndex};
use stocs_core::icp::{refine, IcpConfig};
use stocs_core::ingest::{backproject, combine_multiscale, normalize_heatmap, CameraIntrinsics, DepthImage, RawHeatmap};
use stocs_core::model::ObjectModel;
use stocs_core::simulator::{ground_truth_heatmap, render_scene, HeatmapMode, ObjectSpec, Placement, SceneSpec};
use stocs_core::stocs::{
    merge_outcomes, CongruentIndex, Estimator, GuidedScene, PoseHypothesis, SearchSummary, StocsConfig, DEFAULT_NORMAL_K,
    DEFAULT_STRIDE,
};
use stocs_core::{Error, Result};

use crate::scene::Scene;

/// Normalizes the heatmap (averaging `extra` scales into it first) and
/// builds the guided cloud for `class_id`.
pub fn guided_scene(
    depth: &DepthImage,
    k: &CameraIntrinsics,
    heatmap: &RawHeatmap,
    extra: &[RawHeatmap],
    class_id: &str,
) -> Result<GuidedScene> {
    let raw = if extra.is_empty() {
        heatmap.clone()
    } else {
        let mut all = vec![heatmap.clone()];
        all.extend_from_slice(extra);
        combine_multiscale(&all)?
    };
    if raw.width == 0 {
        return Err(Error::InvalidParameter("heatmap has no cells"));
    }
    let heat = normalize_heatmap(&raw).with_scale_factor(depth.width as f64 / raw.width as f64);
    GuidedScene::from_depth(depth, k, &heat, class_id, DEFAULT_STRIDE, DEFAULT_NORMAL_K)
}

/// Runs `cfg.trials` trials on the current rayon pool. Trials share a
/// pruning bound that only drops hypotheses strictly below a score already
/// reached, so the result is the same for any number of threads.
pub fn search(scene: &GuidedScene, model: &ObjectModel, congruent: &CongruentIndex, cfg: &StocsConfig) -> Result<PoseHypothesis> {
    let estimator = Estimator::new(scene, model, congruent, cfg)?;
    // scores are non-negative, so their bit patterns order like the values
    let shared = AtomicU64::new(0f64.to_bits());
    let summary = (0..cfg.trials)
        .into_par_iter()
        .with_min_len(4)
        .fold(SearchSummary::default, |mut s, trial| {
            let bound = s.best_score().max(f64::from_bits(shared.load(Ordering::Relaxed)));
            s.absorb(estimator.run_trial(trial, bound));
            if let Some(best) = &s.best {
                shared.fetch_max(best.score.to_bits(), Ordering::Relaxed);
            }
            s
        })
        .reduce(SearchSummary::default, |a, b| merge_outcomes([a, b]));
    summary.into_result()
}

/// Refines `initial` against the full-resolution depth cloud near the
/// object, skipping model points hidden from the camera.
pub fn refine_with_depth(
    depth: &DepthImage,
    k: &CameraIntrinsics,
    model: &ObjectModel,
    initial: &RigidTransform,
    delta_s: f64,
) -> Result<RigidTransform> {
    let cloud = backproject(depth, k, 1)?;
    let center = model.cloud.centroid().ok_or(Error::EmptyCloud)?;
    let c = initial.transform_point(&center);
    let reach = model.diameter;
    let near: Vec<usize> = (0..cloud.len()).filter(|&i| (cloud.points[i] - c).norm() <= reach).collect();
    let local = PointCloud::from_points(near.iter().map(|&i| cloud.points[i]).collect())?;
    let index = SpatialIndex::build(&local)?;
    let cfg = IcpConfig {
        cull_hidden: true,
        ..IcpConfig::for_delta_s(delta_s)
    };
    refine(initial, model, &index, &cfg)
}

/// Parses `perfect`, `blurred` or `corrupted:p`.
pub fn parse_heatmap_mode(s: &str) -> Option<HeatmapMode> {
    match s {
        "perfect" => Some(HeatmapMode::Perfect),
        "blurred" => Some(HeatmapMode::Blurred),
        _ => {
            let p: f64 = s.strip_prefix("corrupted:")?.parse().ok()?;
            (0.0..=1.0).contains(&p).then_some(HeatmapMode::Corrupted(p))
        }
    }
}

const PLACEMENT_ATTEMPTS: u64 = 32;

/// Scene `index` of a batch seeded by `seed`: one to four distinct models
/// at random poses on the desk, rendered from `models`.
pub fn simulate_scene(models: &[ObjectModel], seed: u64, index: u32, noise_sigma: f64, mode: HeatmapMode) -> Result<Scene> {
    if models.is_empty() {
        return Err(Error::InvalidParameter("no models to place"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let count = rng.random_range(1..=models.len().min(4));
    let mut picked = index::sample(&mut rng, models.len(), count).into_vec();
    picked.sort_unstable();
    let objects: Vec<ObjectSpec> = picked
        .iter()
        .map(|&model| ObjectSpec {
            model,
            placement: Placement::Random,
        })
        .collect();
    let mut last = Error::ObjectOutOfFrustum { object: 0 };
    for _ in 0..PLACEMENT_ATTEMPTS {
        let mut spec = SceneSpec::desk(objects.clone(), rng.random());
        spec.noise_sigma = noise_sigma;
        match render_scene(&spec, models) {
            Ok((depth, truth)) => {
                let heatmap = ground_truth_heatmap(&truth, mode, rng.random());
                return Ok(Scene {
                    depth,
                    intrinsics: spec.intrinsics,
                    heatmap,
                    truth,
                });
            }
            Err(e @ Error::ObjectOutOfFrustum { .. }) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}
