mod common;

use std::collections::HashMap;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stocs_core::geometry::{Point3, PointCloud, RigidTransform, SpatialIndex, UnitVector3};
use stocs_core::ingest::normalize_heatmap;
use stocs_core::model::{compute_ppf, model_from_oriented_cloud, EdgeParams, EdgeWeighting, ObjectModel, PpfSteps};
use stocs_core::simulator::{
    ground_truth_heatmap, render_scene, standard_models, HeatmapMode, ObjectSpec, Placement, SceneSpec, Shape,
};
use stocs_core::stocs::*;
use stocs_core::Error;

fn ten_point_setup(probs: Vec<f64>) -> (GuidedScene, ObjectModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cloud = random_oriented_cloud(&mut rng, 10, 1.0);
    let model = model_from_oriented_cloud(cloud.clone(), PpfSteps::for_diameter(cloud.diameter()), "pts".into());
    (GuidedScene::new(cloud, probs).unwrap(), model)
}

fn flat_edges(model: &ObjectModel) -> StocsConfig {
    let mut cfg = StocsConfig::for_model(model);
    cfg.edge = EdgeParams {
        epsilon: 1.0,
        weighting: EdgeWeighting::Binary,
    };
    cfg.min_spread = 0.0;
    cfg.max_spread = 10.0;
    cfg
}

fn subsets_of_four(n: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}

fn empirical(sampler: &BaseSampler<'_>, draws: usize, seed: u64) -> HashMap<[usize; 4], usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = HashMap::new();
    for _ in 0..draws {
        let mut idx = sampler.sample(&mut rng).unwrap().indices;
        idx.sort_unstable();
        *counts.entry(idx).or_insert(0) += 1;
    }
    counts
}

fn total_variation(counts: &HashMap<[usize; 4], usize>, draws: usize, exact: &HashMap<[usize; 4], f64>) -> f64 {
    let mut tv = 0.0;
    for (s, p) in exact {
        let q = *counts.get(s).unwrap_or(&0) as f64 / draws as f64;
        tv += (p - q).abs();
    }
    let outside: usize = counts.iter().filter(|(s, _)| !exact.contains_key(*s)).map(|(_, c)| c).sum();
    0.5 * (tv + outside as f64 / draws as f64)
}

#[test]
fn all_zero_probabilities_have_no_support() {
    let (scene, model) = ten_point_setup(vec![0.0; 10]);
    let cfg = StocsConfig::for_model(&model);
    assert!(matches!(BaseSampler::new(&scene, &model, &cfg), Err(Error::InsufficientSupport)));
    assert_eq!(estimate_pose(&scene, &model, &cfg), Err(Error::InsufficientSupport));
}

#[test]
fn uniform_base_sampling_matches_enumeration() {
    let (scene, model) = ten_point_setup(vec![1.0; 10]);
    let cfg = flat_edges(&model);
    let sampler = BaseSampler::new(&scene, &model, &cfg).unwrap();
    let subsets = subsets_of_four(10);
    let exact: HashMap<_, _> = subsets.iter().map(|s| (*s, 1.0 / subsets.len() as f64)).collect();
    let draws = 200_000;
    let tv = total_variation(&empirical(&sampler, draws, 1), draws, &exact);
    assert!(tv < 0.02, "tv {tv}");
}

#[test]
fn exact_mode_matches_weighted_enumeration() {
    let probs: Vec<f64> = (0..10).map(|i| 0.1 + 0.09 * i as f64).collect();
    let (scene, model) = ten_point_setup(probs.clone());
    let mut cfg = flat_edges(&model);
    cfg.sampling = SamplingMode::Exact { max_attempts: 10_000 };
    // a spread window that excludes some pairs
    cfg.min_spread = 0.3;
    let min_d = cfg.min_spread * model.diameter;
    let pts = &scene.cloud.points;
    let mut weights = HashMap::new();
    for s in subsets_of_four(10) {
        let ok = (0..4).all(|a| (a + 1..4).all(|b| (pts[s[a]] - pts[s[b]]).norm() >= min_d));
        if ok {
            weights.insert(s, s.iter().map(|&i| probs[i]).product::<f64>());
        }
    }
    assert!(weights.len() < 210 && weights.len() > 20);
    let z: f64 = weights.values().sum();
    let exact: HashMap<_, _> = weights.into_iter().map(|(s, w)| (s, w / z)).collect();
    let sampler = BaseSampler::new(&scene, &model, &cfg).unwrap();
    let draws = 100_000;
    let tv = total_variation(&empirical(&sampler, draws, 2), draws, &exact);
    assert!(tv < 0.03, "tv {tv}");
}

#[test]
fn hot_point_dominates_bases() {
    let eps = 0.01;
    let mut probs = vec![eps; 10];
    probs[3] = 1.0;
    let (scene, model) = ten_point_setup(probs);
    let cfg = flat_edges(&model);
    // enumeration: subsets containing the hot point weigh eps^3, others eps^4
    let with = 84.0 * eps.powi(3);
    let without = 126.0 * eps.powi(4);
    assert!(with / (with + without) > 0.95);
    let sampler = BaseSampler::new(&scene, &model, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let hits = (0..20_000)
        .filter(|_| sampler.sample(&mut rng).unwrap().indices.contains(&3))
        .count();
    assert!(hits as f64 / 20_000.0 > 0.95);
}

#[test]
fn sampled_bases_respect_spread_and_potentials() {
    let models = standard_models(0.004, 0.01).unwrap();
    let model = &models[0];
    let scene_cloud = RigidTransform::from_translation([0.0, 0.0, 0.8].into()).apply(&model.cloud);
    let n = scene_cloud.len();
    let scene = GuidedScene::new(scene_cloud, vec![0.5; n]).unwrap();
    let cfg = StocsConfig::for_model(model);
    let sampler = BaseSampler::new(&scene, model, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let b = sampler.sample(&mut rng).unwrap();
        for (slot, &(x, y)) in BASE_PAIRS.iter().enumerate() {
            assert_ne!(b.indices[x], b.indices[y]);
            let d = (scene.cloud.points[b.indices[x]] - scene.cloud.points[b.indices[y]]).norm();
            assert!(d >= 0.2 * model.diameter && d <= 0.8 * model.diameter);
            assert!(b.edge[slot] > 0.0 && b.edge[slot] <= 1.0);
        }
        assert!(b.node.iter().all(|&p| p == 0.5));
    }
}

/// Every ordered model 4-tuple whose six pair features agree with the base.
fn brute_force_congruent(model: &ObjectModel, bp: &[Point3; 4], bn: &[UnitVector3; 4], dt: f64, at: f64) -> Vec<Quadruple> {
    let n = model.len();
    let c = &model.cloud;
    let feat = |i: usize, j: usize| compute_ppf(&c.points[i], &c.normals[i], &c.points[j], &c.normals[j]).ok();
    let table: Vec<Vec<_>> = (0..n).map(|i| (0..n).map(|j| if i == j { None } else { feat(i, j) }).collect()).collect();
    let base: Vec<_> = BASE_PAIRS
        .iter()
        .map(|&(a, b)| compute_ppf(&bp[a], &bn[a], &bp[b], &bn[b]).unwrap())
        .collect();
    let close = |f: &Option<stocs_core::model::PointPairFeature>, g: &stocs_core::model::PointPairFeature| {
        f.as_ref().is_some_and(|f| {
            (f.distance - g.distance).abs() <= dt
                && (f.angle_n1_d - g.angle_n1_d).abs() <= at
                && (f.angle_n2_d - g.angle_n2_d).abs() <= at
                && (f.angle_n1_n2 - g.angle_n1_n2).abs() <= at
        })
    };
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let q = [i, j, k, l];
                    if BASE_PAIRS.iter().zip(&base).all(|(&(a, b), g)| close(&table[q[a]][q[b]], g)) {
                        out.push([i as u32, j as u32, k as u32, l as u32]);
                    }
                }
            }
        }
    }
    out
}

#[test]
fn congruent_sets_match_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let cloud = random_oriented_cloud(&mut rng, 50, 0.1);
    let steps = PpfSteps::for_diameter(cloud.diameter());
    let model = model_from_oriented_cloud(cloud, steps, "m".into());
    let index = CongruentIndex::build(&model);
    let dt = 0.01;
    let at = 0.5;
    for trial in 0..5 {
        let t = random_transform(&mut rng, 0.5);
        let mut pick = rand::seq::index::sample(&mut rng, 50, 4).into_vec();
        if trial == 0 {
            pick.sort_unstable();
        }
        let bp: [Point3; 4] = std::array::from_fn(|a| t.transform_point(&model.cloud.points[pick[a]]));
        let bn: [UnitVector3; 4] = std::array::from_fn(|a| t.transform_normal(&model.cloud.normals[pick[a]]));
        let found = index.find(&bp, &bn, dt, at, usize::MAX);
        let expected = brute_force_congruent(&model, &bp, &bn, dt, at);
        assert_eq!(found, expected);
        let own = [pick[0] as u32, pick[1] as u32, pick[2] as u32, pick[3] as u32];
        assert!(found.contains(&own));
        assert_eq!(index.find(&bp, &bn, dt, at, 1), expected[..1].to_vec());
    }
}

#[test]
fn base_wider_than_model_has_no_congruent_set() {
    let models = standard_models(0.004, 0.01).unwrap();
    let model = &models[1];
    let index = CongruentIndex::build(model);
    let cfg = StocsConfig::for_model(model);
    let far = model.diameter + cfg.distance_tolerance + 0.01;
    let bp = [
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(far, 0.0, 0.0),
        Point3::new(0.0, 0.05, 0.0),
        Point3::new(0.0, 0.0, 0.05),
    ];
    let bn = [UnitVector3::new_normalize([0.0, 0.0, 1.0].into()); 4];
    assert!(find_congruent_sets(&bp, &bn, &index, &cfg).is_empty());
}

#[test]
fn score_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let cloud = random_oriented_cloud(&mut rng, 30, 0.1);
    let model = model_from_oriented_cloud(cloud.clone(), PpfSteps::for_diameter(cloud.diameter()), "m".into());
    let scene_pts: Vec<Point3> = (0..400)
        .map(|_| Point3::new(rng.random_range(-0.1..0.2), rng.random_range(-0.1..0.2), rng.random_range(-0.1..0.2)))
        .collect();
    let probs: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
    let index = SpatialIndex::from_points(&scene_pts).unwrap();
    let delta = 0.02;
    for _ in 0..20 {
        let t = random_transform(&mut rng, 0.05);
        let mut oracle = 0.0;
        for m in &model.cloud.points {
            let q = t.transform_point(m);
            let (mut best, mut bd) = (usize::MAX, f64::INFINITY);
            for (j, s) in scene_pts.iter().enumerate() {
                let d = (s - q).norm();
                if d < bd {
                    best = j;
                    bd = d;
                }
            }
            if bd < delta {
                oracle += probs[best];
            }
        }
        let s = score_hypothesis(&t, &model, &index, &probs, delta);
        assert!((s - oracle).abs() <= 1e-9);
    }
}

#[test]
fn score_trivial_cases_and_monotonicity() {
    let models = standard_models(0.004, 0.01).unwrap();
    let model = &models[2];
    let index = SpatialIndex::build(&model.cloud).unwrap();
    let n = model.len();
    let ones = vec![1.0; n];
    let delta = 0.005;
    let id = RigidTransform::identity();
    assert_eq!(score_hypothesis(&id, model, &index, &ones, delta), n as f64);
    let away = RigidTransform::from_translation([10.0 * model.diameter, 0.0, 0.0].into());
    assert_eq!(score_hypothesis(&away, model, &index, &ones, delta), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let probs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let t = RigidTransform::from_axis_angle([0.0, 0.0, 0.05].into(), [0.003, 0.0, 0.0].into());
    let base = score_hypothesis(&t, model, &index, &probs, delta);
    for _ in 0..20 {
        let mut raised = probs.clone();
        let k = rng.random_range(0..n);
        raised[k] += rng.random::<f64>();
        assert!(score_hypothesis(&t, model, &index, &raised, delta) >= base);
    }
}

fn copy_scene(model: &ObjectModel, t: &RigidTransform) -> GuidedScene {
    let cloud = t.apply(&model.cloud);
    let n = cloud.len();
    GuidedScene::new(cloud, vec![1.0; n]).unwrap()
}

#[test]
fn recovers_pose_of_model_copy() {
    let models = standard_models(0.004, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for model in &models {
        let t = random_transform(&mut rng, 0.3);
        let scene = copy_scene(model, &t);
        let mut cfg = StocsConfig::for_model(model);
        cfg.trials = 200;
        let h = estimate_pose(&scene, model, &cfg).unwrap();
        let add = mean_displacement(&model.cloud.points, &h.transform, &t);
        assert!(add < 0.01 * model.diameter, "{} add {add}", model.id);
        // the reported score is the plain score of the reported transform
        let s = score_hypothesis(&h.transform, model, &scene.index, &scene.probs, cfg.delta_s);
        assert_eq!(h.score, s);
        assert!(h.score <= model.len() as f64);
    }
}

#[test]
fn recovery_is_equivariant_under_global_motion() {
    let models = standard_models(0.004, 0.01).unwrap();
    let model = &models[3];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = random_transform(&mut rng, 0.3);
    let g = random_transform(&mut rng, 1.0);
    let mut cfg = StocsConfig::for_model(model);
    cfg.trials = 200;
    for truth in [t, g.compose(&t)] {
        let h = estimate_pose(&copy_scene(model, &truth), model, &cfg).unwrap();
        assert!(mean_displacement(&model.cloud.points, &h.transform, &truth) < 0.01 * model.diameter);
    }
}

fn two_object_scene(seed: u64) -> (Vec<ObjectModel>, SceneSpec) {
    let models = standard_models(0.004, 0.01).unwrap();
    let objects = vec![
        ObjectSpec {
            model: 0,
            placement: Placement::Random,
        },
        ObjectSpec {
            model: 3,
            placement: Placement::Random,
        },
    ];
    let mut spec = SceneSpec::desk(objects, seed);
    spec.noise_sigma = 0.0;
    (models, spec)
}

#[test]
fn heatmap_selects_the_target_among_two_objects() {
    let (models, spec) = two_object_scene(21);
    let (depth, gt) = render_scene(&spec, &models).unwrap();
    let heat = normalize_heatmap(&ground_truth_heatmap(&gt, HeatmapMode::Perfect, 0));
    for (obj, mi) in [(0, 0), (1, 3)] {
        let model = &models[mi];
        let scene = GuidedScene::from_depth(&depth, &spec.intrinsics, &heat, &model.id, DEFAULT_STRIDE, DEFAULT_NORMAL_K)
            .unwrap();
        let cfg = StocsConfig::for_model(model);
        let h = estimate_pose(&scene, model, &cfg).unwrap();
        let add = mean_displacement(&model.cloud.points, &h.transform, &gt.objects[obj].pose);
        assert!(add < 0.05 * model.diameter, "{} add {add}", model.id);
    }
}

#[test]
fn guidance_is_scale_invariant() {
    let (models, spec) = two_object_scene(22);
    let (depth, gt) = render_scene(&spec, &models).unwrap();
    let heat = normalize_heatmap(&ground_truth_heatmap(&gt, HeatmapMode::Blurred, 0));
    let model = &models[0];
    let scene =
        GuidedScene::from_depth(&depth, &spec.intrinsics, &heat, &model.id, DEFAULT_STRIDE, DEFAULT_NORMAL_K).unwrap();
    let mut cfg = StocsConfig::for_model(model);
    cfg.trials = 100;
    let reference = estimate_pose(&scene, model, &cfg).unwrap();
    for c in [4.0, 0.37] {
        let scaled = scene.with_probs(scene.probs.iter().map(|p| p * c).collect()).unwrap();
        let h = estimate_pose(&scaled, model, &cfg).unwrap();
        assert_eq!(h.transform, reference.transform);
        assert_eq!(h.trial, reference.trial);
        assert_eq!(h.base.indices, reference.base.indices);
        assert!((h.score - c * reference.score).abs() <= 1e-9 * h.score);
    }
}

#[test]
fn more_trials_never_lower_the_best_score_and_partitions_agree() {
    let (models, spec) = two_object_scene(23);
    let (depth, gt) = render_scene(&spec, &models).unwrap();
    let heat = normalize_heatmap(&ground_truth_heatmap(&gt, HeatmapMode::Perfect, 0));
    let model = &models[3];
    let scene =
        GuidedScene::from_depth(&depth, &spec.intrinsics, &heat, &model.id, DEFAULT_STRIDE, DEFAULT_NORMAL_K).unwrap();
    let cfg = StocsConfig::for_model(model);
    let index = CongruentIndex::build(model);
    let est = Estimator::new(&scene, model, &index, &cfg).unwrap();
    let mut last = f64::NEG_INFINITY;
    for n in [10, 40, 120] {
        let s = est.run_trials(0..n).best_score();
        assert!(s >= last);
        last = s;
    }
    let serial = est.run_trials(0..120);
    for cuts in [vec![0, 120], vec![0, 7, 60, 61, 120], vec![0, 30, 60, 90, 120]] {
        let parts: Vec<_> = cuts.windows(2).rev().map(|w| est.run_trials(w[0]..w[1])).collect();
        let merged = merge_outcomes(parts);
        assert_eq!(merged.best, serial.best);
        assert_eq!(merged.no_base + merged.no_congruent + merged.scored, 120);
    }
}

#[test]
fn mismatched_geometry_yields_no_hypothesis() {
    // a flat plate model: every pair has parallel normals
    let mut pts = Vec::new();
    for i in 0..15 {
        for j in 0..15 {
            pts.push(Point3::new(i as f64 * 0.014, j as f64 * 0.014, 0.0));
        }
    }
    let up = UnitVector3::new_normalize([0.0, 0.0, 1.0].into());
    let plate = PointCloud::with_normals(pts.clone(), vec![up; pts.len()]).unwrap();
    let model = model_from_oriented_cloud(plate.clone(), PpfSteps::for_diameter(plate.diameter()), "plate".into());
    // scene: a sphere with outward normals
    let mut sp = Vec::new();
    let mut sn = Vec::new();
    for i in 0..20 {
        for j in 0..20 {
            let th = 0.2 + 2.7 * i as f64 / 19.0;
            let ph = 6.2 * j as f64 / 19.0;
            let d = nalgebra::Vector3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
            sp.push(Point3::from(d * 0.06));
            sn.push(UnitVector3::new_normalize(d));
        }
    }
    let n = sp.len();
    let scene = GuidedScene::new(PointCloud::with_normals(sp, sn).unwrap(), vec![1.0; n]).unwrap();
    let mut cfg = StocsConfig::for_model(&model);
    cfg.trials = 30;
    assert_eq!(estimate_pose(&scene, &model, &cfg), Err(Error::NoHypothesisFound));
}

#[test]
fn shapes_are_distinct_models() {
    let names: Vec<_> = Shape::ALL.iter().map(|s| s.name()).collect();
    let models = standard_models(0.004, 0.01).unwrap();
    assert_eq!(models.iter().map(|m| m.id.as_str()).collect::<Vec<_>>(), names);
}
