use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use stocs::heatmap::{load_heatmap, save_heatmap};
use stocs::ply::write_ply;
use stocs::records::{GroundTruthRecord, PoseRecord};
use stocs::scene::{scene_path, SUFFIXES};
use stocs_core::ingest::{ClassGrid, RawHeatmap};
use stocs_core::simulator::Shape;
use tempfile::TempDir;

fn stocs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stocs"))
        .args(args)
        .env_remove("STOCS_LOG")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    _dir: TempDir,
    models: PathBuf,
    scenes: PathBuf,
}

/// Four preprocessed shape models and three simulated scenes, built once.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let models = dir.path().join("models");
        fs::create_dir(&models).unwrap();
        for (i, shape) in Shape::ALL.iter().enumerate() {
            let ply = dir.path().join(format!("{}.ply", shape.name()));
            write_ply(&ply, &shape.sample(0.004), i % 2 == 0).unwrap();
            let spm = models.join(format!("{}.spm", shape.name()));
            let out = stocs(&["preprocess", "--model", p(&ply), "--out", p(&spm), "--voxel", "0.01"]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        }
        let scenes = dir.path().join("scenes");
        let out = stocs(&["simulate", "--models", p(&models), "--n-scenes", "3", "--seed", "5", "--out", p(&scenes)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        Fixture {
            _dir: dir,
            models,
            scenes,
        }
    })
}

fn scene_file(i: u32, suffix: &str) -> PathBuf {
    scene_path(&fixture().scenes, i, suffix)
}

fn model_file(class: &str) -> PathBuf {
    fixture().models.join(format!("{class}.spm"))
}

fn truth(i: u32) -> GroundTruthRecord {
    serde_json::from_slice(&fs::read(scene_file(i, "gt.json")).unwrap()).unwrap()
}

fn estimate_args(i: u32, class: &str, extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = [
        "estimate",
        "--scene-depth",
        p(&scene_file(i, "depth.png")),
        "--intrinsics",
        p(&scene_file(i, "intrinsics.json")),
        "--heatmap",
        p(&scene_file(i, "heatmap.fhm")),
        "--class",
        class,
        "--model",
        p(&model_file(class)),
        "--trials",
        "100",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run(args: &[String]) -> Output {
    stocs(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn preprocess_missing_file_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let out = stocs(&["preprocess", "--model", "/nonexistent.ply", "--out", p(&dir.path().join("m.spm"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn preprocess_unwritable_output_exits_3() {
    let dir = TempDir::new().unwrap();
    let ply = dir.path().join("tee.ply");
    write_ply(&ply, &Shape::Tee.sample(0.006), false).unwrap();
    let out = stocs(&["preprocess", "--model", p(&ply), "--out", "/nonexistent/dir/m.spm"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_writes_exactly_n_scene_quadruples() {
    let names: Vec<String> = fs::read_dir(&fixture().scenes)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.len(), 12);
    for i in 0..3 {
        for s in SUFFIXES {
            assert!(names.contains(&format!("{i:04}_{s}")));
        }
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_is_deterministic_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let base = dir_bytes(&fixture().scenes);
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(threads);
        let out = stocs(&[
            "simulate", "--models", p(&fixture().models), "--n-scenes", "3", "--seed", "5", "--threads", threads, "--out",
            p(&out_dir),
        ]);
        assert!(out.status.success());
        assert_eq!(dir_bytes(&out_dir), base);
    }
}

#[test]
fn simulate_unwritable_output_exits_3() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, b"x").unwrap();
    let out = stocs(&["simulate", "--models", p(&fixture().models), "--out", p(&file.join("sub"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_rejects_unknown_heatmap_mode() {
    let dir = TempDir::new().unwrap();
    let out = stocs(&[
        "simulate", "--models", p(&fixture().models), "--heatmap-mode", "corrupted:2", "--out", p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_is_deterministic_and_reports_timing() {
    let class = truth(0).objects[0].class_id.clone();
    let mut outputs = Vec::new();
    for threads in ["1", "2", "3"] {
        let out = run(&estimate_args(0, &class, &["--seed", "9", "--threads", threads]));
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("{class}: ")));
        outputs.push(out.stdout);
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let pose: PoseRecord = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!((pose.class_id.as_str(), pose.trials, pose.seed), (class.as_str(), 100, 9));
}

#[test]
fn estimate_with_refinement_and_multiscale_writes_out_file() {
    let dir = TempDir::new().unwrap();
    let class = truth(1).objects[0].class_id.clone();
    let heat = scene_file(1, "heatmap.fhm");
    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");
    for (threads, path) in [("1", &out_a), ("2", &out_b)] {
        let out = run(&estimate_args(
            1,
            &class,
            &["--refine-icp", "--multiscale-heatmaps", p(&heat), "--threads", threads, "--out", p(path)],
        ));
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
    assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());
}

#[test]
fn all_zero_heatmap_exits_4_with_reason() {
    let dir = TempDir::new().unwrap();
    let class = truth(0).objects[0].class_id.clone();
    let mut heat = load_heatmap(&scene_file(0, "heatmap.fhm")).unwrap();
    heat.classes.iter_mut().for_each(|g| g.values.iter_mut().for_each(|v| *v = 0.0));
    let zero = dir.path().join("zero.fhm");
    save_heatmap(&heat, &zero).unwrap();
    let mut args = estimate_args(0, &class, &[]);
    let at = args.iter().position(|a| a == "--heatmap").unwrap();
    args[at + 1] = p(&zero).to_string();
    let out = run(&args);
    assert_eq!(out.status.code(), Some(4));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["reason"], "insufficient-support");
}

#[test]
fn estimate_unknown_class_is_an_input_error() {
    let class = truth(0).objects[0].class_id.clone();
    let mut args = estimate_args(0, &class, &[]);
    let at = args.iter().position(|a| a == "--class").unwrap();
    args[at + 1] = "nonexistent".into();
    assert_eq!(run(&args).status.code(), Some(2));
}

fn perfect_predictions(gt: &GroundTruthRecord) -> serde_json::Value {
    serde_json::Value::Array(
        gt.objects
            .iter()
            .map(|o| {
                serde_json::to_value(PoseRecord {
                    class_id: o.class_id.clone(),
                    quaternion: o.quaternion,
                    translation: o.translation,
                    score: 1.0,
                    trials: 1,
                    seed: 0,
                })
                .unwrap()
            })
            .collect(),
    )
}

fn evaluate_args(i: u32, pred: &Path, extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = vec![
        "evaluate".into(),
        "--pred".into(),
        p(pred).into(),
        "--gt".into(),
        p(&scene_file(i, "gt.json")).into(),
        "--scene-depth".into(),
        p(&scene_file(i, "depth.png")).into(),
        "--intrinsics".into(),
        p(&scene_file(i, "intrinsics.json")).into(),
        "--model".into(),
    ];
    for s in Shape::ALL {
        v.push(p(&model_file(s.name())).into());
    }
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

#[test]
fn evaluate_perfect_predictions() {
    let dir = TempDir::new().unwrap();
    let pred = dir.path().join("pred.json");
    for i in 0..3 {
        let gt = truth(i);
        fs::write(&pred, serde_json::to_vec(&perfect_predictions(&gt)).unwrap()).unwrap();
        let mut outputs = Vec::new();
        for threads in ["1", "2"] {
            let out = run(&evaluate_args(i, &pred, &["--threads", threads]));
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
            outputs.push(out.stdout);
        }
        assert_eq!(outputs[0], outputs[1]);
        let r: serde_json::Value = serde_json::from_slice(&outputs[0]).unwrap();
        assert_eq!(r["objects"].as_array().unwrap().len(), gt.objects.len());
        for o in r["objects"].as_array().unwrap() {
            assert_eq!(o["add"], 0.0);
            assert_eq!(o["vsd"], 0.0);
            assert_eq!(o["correct_add"], true);
        }
        assert_eq!(r["aggregate"]["recall_vsd"], 1.0);
        assert_eq!(r["aggregate"]["recall_add"], 1.0);
        assert_eq!(r["aggregate"]["auc_add_s"], 1.0);
    }
}

#[test]
fn evaluate_empty_predictions_warns_and_scores_zero() {
    let dir = TempDir::new().unwrap();
    let pred = dir.path().join("pred.json");
    fs::write(&pred, b"[]").unwrap();
    let out = run(&evaluate_args(0, &pred, &[]));
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["aggregate"]["recall_vsd"], 0.0);
    assert_eq!(r["aggregate"]["auc_add_s"], 0.0);
}

#[test]
fn evaluate_schema_mismatch_exits_2() {
    let dir = TempDir::new().unwrap();
    let pred = dir.path().join("pred.json");
    fs::write(&pred, br#"[{"class_id": "tee", "rotation": [1, 0, 0, 0]}]"#).unwrap();
    assert_eq!(run(&evaluate_args(0, &pred, &[])).status.code(), Some(2));
    fs::write(&pred, b"[]").unwrap();
    let gt_copy = dir.path().join("gt.json");
    fs::write(&gt_copy, br#"{"width": 640}"#).unwrap();
    let mut args = evaluate_args(0, &pred, &[]);
    let at = args.iter().position(|a| a == "--gt").unwrap();
    args[at + 1] = p(&gt_copy).into();
    assert_eq!(run(&args).status.code(), Some(2));
}

#[test]
fn evaluate_vsd_without_depth_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let pred = dir.path().join("pred.json");
    fs::write(&pred, b"[]").unwrap();
    let out = stocs(&[
        "evaluate", "--pred", p(&pred), "--gt", p(&scene_file(0, "gt.json")), "--model", p(&model_file("tee")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

fn write_heatmap(dir: &Path, classes: &[(&str, Vec<f64>)]) -> PathBuf {
    let path = dir.join("h.fhm");
    let grids = classes
        .iter()
        .map(|(id, v)| ClassGrid {
            class_id: id.to_string(),
            values: v.clone(),
        })
        .collect();
    save_heatmap(&RawHeatmap::new(2, 2, grids).unwrap(), &path).unwrap();
    path
}

#[test]
fn score_heatmap_zero_map_gives_one_half() {
    let dir = TempDir::new().unwrap();
    let h = write_heatmap(dir.path(), &[("a", vec![0.0; 4]), ("b", vec![0.0; 4])]);
    let out = stocs(&["score-heatmap", "--heatmap", p(&h)]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["a"], 0.5);
    assert_eq!(v["b"], 0.5);
}

#[test]
fn score_heatmap_orders_hot_cells() {
    let dir = TempDir::new().unwrap();
    let h = write_heatmap(
        dir.path(),
        &[("a", vec![0.0, 0.0, 2.0, 0.0]), ("b", vec![5.0, 0.0, 0.0, 0.0]), ("c", vec![0.0, 1.0, 0.0, 0.0])],
    );
    let mut outs = Vec::new();
    for threads in ["1", "2"] {
        let out = stocs(&["score-heatmap", "--heatmap", p(&h), "--k-max", "1", "--k-min", "1", "--threads", threads]);
        outs.push(out.stdout);
    }
    assert_eq!(outs[0], outs[1]);
    let v: serde_json::Value = serde_json::from_slice(&outs[0]).unwrap();
    let s = |c: &str| v[c].as_f64().unwrap();
    assert!(s("b") > s("a") && s("a") > s("c"));
}

#[test]
fn score_heatmap_rejects_bad_magic_and_large_k() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.fhm");
    fs::write(&bad, b"XXXX\x01\0\0\0\x01\0\0\0\0\0\0\0").unwrap();
    assert_eq!(stocs(&["score-heatmap", "--heatmap", p(&bad)]).status.code(), Some(2));
    let h = write_heatmap(dir.path(), &[("a", vec![0.0; 4])]);
    assert_eq!(stocs(&["score-heatmap", "--heatmap", p(&h), "--k-max", "5"]).status.code(), Some(2));
}

#[test]
fn stocs_log_overrides_log_level() {
    let dir = TempDir::new().unwrap();
    let ply = dir.path().join("tee.ply");
    write_ply(&ply, &Shape::Tee.sample(0.006), false).unwrap();
    let spm = dir.path().join("t.spm");
    let args = ["--log-level", "error", "preprocess", "--model", p(&ply), "--out", p(&spm)];
    let quiet = stocs(&args);
    assert!(quiet.stderr.is_empty());
    let loud = Command::new(env!("CARGO_BIN_EXE_stocs"))
        .args(args)
        .env("STOCS_LOG", "info")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&loud.stderr).contains("feature keys"));
}

#[test]
fn every_command_output_is_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let ply = dir.path().join("stairs.ply");
    write_ply(&ply, &Shape::Stairs.sample(0.004), true).unwrap();
    let a = dir.path().join("a.spm");
    let b = dir.path().join("b.spm");
    for (t, out) in [("1", &a), ("3", &b)] {
        assert!(stocs(&["preprocess", "--model", p(&ply), "--out", p(out), "--threads", t]).status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}
