//! The `stocs` command-line tool.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use stocs_core::geometry::RigidTransform;
use stocs_core::ingest::CameraIntrinsics;
use stocs_core::metrics::{accuracy_curve, auc, pose_error, pose_correct_add, vsd_error, VsdParams, AUC_BINS, AUC_MAX_THRESHOLD};
use stocs_core::model::{build_model, subsample, ObjectModel, PpfSteps};
use stocs_core::simulator::GroundTruth;
use stocs_core::stocs::{CongruentIndex, StocsConfig};
use stocs_core::weak::{logistic, spatial_pool_grid, WildcatPoolingConfig};

use crate::depth::load_depth;
use crate::error::{Error, Result};
use crate::heatmap::load_heatmap;
use crate::pipeline::{guided_scene, parse_heatmap_mode, refine_with_depth, search, simulate_scene};
use crate::ply::read_ply;
use crate::records::{
    read_json, to_json, Aggregate, EstimateRecord, FailureRecord, GroundTruthRecord, IntrinsicsRecord, ObjectReport,
    PoseRecord, PredictionFile, Report,
};
use crate::scene::write_scene;
use crate::spm::{load_model, quantize_model, save_model};

/// ADD threshold for a correct pose, as a fraction of the model diameter.
const ADD_FRACTION: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(name = "stocs", version, about = "Heatmap-guided 6D pose estimation from depth images")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses one per core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// error, warn, info, debug or trace. STOCS_LOG takes precedence.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an object model from a PLY cloud.
    Preprocess(PreprocessArgs),
    /// Estimate the pose of one class in a depth image.
    Estimate(EstimateArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Generate synthetic scenes.
    Simulate(SimulateArgs),
    /// Per-class scores of a heatmap by spatial pooling.
    ScoreHeatmap(ScoreHeatmapArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Subsampling distance, meters.
    #[arg(long, default_value_t = 0.01)]
    pub voxel: f64,
    /// Feature distance bin, meters. Defaults to 2% of the model diameter.
    #[arg(long)]
    pub dist_step: Option<f64>,
    /// Feature angle bin, degrees.
    #[arg(long, default_value_t = PpfSteps::DEFAULT_ANGLE_DEG)]
    pub angle_step: f64,
    /// Class id; defaults to the PLY file stem.
    #[arg(long)]
    pub id: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub scene_depth: PathBuf,
    #[arg(long)]
    pub intrinsics: PathBuf,
    #[arg(long)]
    pub heatmap: PathBuf,
    #[arg(long = "class")]
    pub class_id: String,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = StocsConfig::DEFAULT_TRIALS)]
    pub trials: usize,
    /// Inlier distance, meters. Defaults to max(5 mm, 1% of the diameter).
    #[arg(long)]
    pub delta_s: Option<f64>,
    #[arg(long)]
    pub refine_icp: bool,
    /// Heatmaps at other scales, averaged with --heatmap.
    #[arg(long, num_args = 1..)]
    pub multiscale_heatmaps: Vec<PathBuf>,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// One model per class; objects of other classes are skipped.
    #[arg(long, num_args = 1.., required = true)]
    pub model: Vec<PathBuf>,
    /// Comma separated subset of add, adds, vsd.
    #[arg(long, default_value = "add,adds,vsd")]
    pub metrics: String,
    #[arg(long, default_value_t = 0.02)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.3)]
    pub theta: f64,
    #[arg(long)]
    pub scene_depth: Option<PathBuf>,
    #[arg(long)]
    pub intrinsics: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Directory of .spm models.
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub n_scenes: u32,
    /// Depth noise standard deviation, meters.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// perfect, blurred or corrupted:p with p in [0, 1].
    #[arg(long, default_value = "perfect")]
    pub heatmap_mode: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreHeatmapArgs {
    #[arg(long)]
    pub heatmap: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k_max: usize,
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses arguments, runs the command and maps failures to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.log_level);
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn init_logging(level: &str) {
    let filters = std::env::var("STOCS_LOG").unwrap_or_else(|_| level.to_string());
    let _ = env_logger::Builder::new()
        .parse_filters(&filters)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Runs the parsed command on a pool of `cli.threads` workers and returns
/// the exit code.
pub fn run(cli: &Cli) -> Result<u8> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Malformed {
            path: PathBuf::new(),
            reason: format!("cannot start worker threads: {e}"),
        })?;
    pool.install(|| match &cli.command {
        Command::Preprocess(a) => preprocess(a).map(|_| 0),
        Command::Estimate(a) => estimate(a, cli.seed),
        Command::Evaluate(a) => evaluate(a).map(|_| 0),
        Command::Simulate(a) => simulate(a, cli.seed).map(|_| 0),
        Command::ScoreHeatmap(a) => score_heatmap(a).map(|_| 0),
    })
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => crate::error::write_file(path, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::write(Path::new("<stdout>"), e)),
    }
}

fn invalid(what: &str) -> Error {
    Error::Core(stocs_core::Error::InvalidParameter(match what {
        "voxel" => "voxel must be positive",
        "tau" => "tau must be positive",
        "theta" => "theta must be in (0, 1)",
        "noise" => "noise sigma must be non-negative",
        _ => "invalid argument",
    }))
}

fn preprocess(a: &PreprocessArgs) -> Result<()> {
    if !(a.voxel > 0.0 && a.voxel.is_finite()) {
        return Err(invalid("voxel"));
    }
    let cloud = read_ply(&a.model)?;
    let id = match &a.id {
        Some(id) => id.clone(),
        None => a
            .model
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::malformed(&a.model, "cannot derive a class id from the file name"))?
            .to_string(),
    };
    let thinned = subsample(&cloud, a.voxel)?;
    let steps = PpfSteps {
        distance: a.dist_step.unwrap_or(PpfSteps::DEFAULT_DISTANCE_FRACTION * thinned.diameter()),
        angle: a.angle_step.to_radians(),
    };
    let model = quantize_model(&build_model(&thinned, a.voxel, steps, id)?);
    info!("{}: {} points, {} feature keys", model.id, model.len(), model.ppf.len());
    save_model(&model, &a.out)
}

fn load_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let k: CameraIntrinsics = read_json::<IntrinsicsRecord>(path)?.into();
    k.validate().map_err(|e| Error::malformed(path, e.to_string()))?;
    Ok(k)
}

fn estimate(a: &EstimateArgs, seed: u64) -> Result<u8> {
    let depth = load_depth(&a.scene_depth)?;
    let k = load_intrinsics(&a.intrinsics)?;
    let heatmap = load_heatmap(&a.heatmap)?;
    let extra = a.multiscale_heatmaps.iter().map(|p| load_heatmap(p)).collect::<Result<Vec<_>>>()?;
    let model = load_model(&a.model)?;
    let mut cfg = StocsConfig::for_model(&model);
    cfg.trials = a.trials;
    cfg.seed = seed;
    if let Some(d) = a.delta_s {
        cfg.delta_s = d;
        cfg.distance_tolerance = d;
    }
    cfg.validate()?;

    let start = Instant::now();
    let outcome = guided_scene(&depth, &k, &heatmap, &extra, &a.class_id).and_then(|scene| {
        let congruent = CongruentIndex::build(&model);
        search(&scene, &model, &congruent, &cfg)
    });
    let record = match outcome {
        Ok(h) => {
            let mut pose = h.transform;
            if a.refine_icp {
                match refine_with_depth(&depth, &k, &model, &pose, cfg.delta_s) {
                    Ok(t) => pose = t,
                    Err(e) => warn!("refinement skipped: {e}"),
                }
            }
            EstimateRecord::Pose(PoseRecord {
                class_id: a.class_id.clone(),
                quaternion: pose.wxyz(),
                translation: pose.translation.into(),
                score: h.score,
                trials: cfg.trials,
                seed,
            })
        }
        Err(e @ (stocs_core::Error::InsufficientSupport | stocs_core::Error::NoHypothesisFound)) => {
            warn!("{}: {e}", a.class_id);
            let reason = match e {
                stocs_core::Error::InsufficientSupport => "insufficient-support",
                _ => "no-hypothesis",
            };
            EstimateRecord::Failure(FailureRecord {
                class_id: a.class_id.clone(),
                reason: reason.to_string(),
                trials: cfg.trials,
                seed,
            })
        }
        Err(e) => return Err(e.into()),
    };
    eprintln!("{}: {:.3} s", a.class_id, start.elapsed().as_secs_f64());
    emit(a.out.as_deref(), &to_json(&record))?;
    Ok(match record {
        EstimateRecord::Pose(_) => 0,
        EstimateRecord::Failure(_) => 4,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct MetricSet {
    add: bool,
    adds: bool,
    vsd: bool,
}

fn parse_metrics(s: &str) -> Option<MetricSet> {
    let mut m = MetricSet::default();
    for name in s.split(',').map(str::trim) {
        match name {
            "add" => m.add = true,
            "adds" | "add-s" | "add_s" => m.adds = true,
            "vsd" => m.vsd = true,
            _ => return None,
        }
    }
    Some(m)
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let metrics = parse_metrics(&a.metrics)
        .ok_or_else(|| Error::malformed(Path::new("--metrics"), "expected a list of add, adds, vsd"))?;
    if !(a.tau > 0.0) {
        return Err(invalid("tau"));
    }
    if !(a.theta > 0.0 && a.theta < 1.0) {
        return Err(invalid("theta"));
    }
    let preds = read_json::<PredictionFile>(&a.pred)?.poses();
    let truth: GroundTruth = (&read_json::<GroundTruthRecord>(&a.gt)?).into();
    let models = a.model.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
    let scene = if metrics.vsd {
        let (Some(d), Some(k)) = (&a.scene_depth, &a.intrinsics) else {
            return Err(Error::malformed(Path::new("--metrics"), "vsd needs --scene-depth and --intrinsics"));
        };
        Some((load_depth(d)?, load_intrinsics(k)?))
    } else {
        None
    };
    if preds.is_empty() {
        warn!("prediction set is empty; every object counts as missed");
    }

    // each prediction is matched to the first unmatched object of its class
    let mut used = vec![false; preds.len()];
    let mut jobs: Vec<(&ObjectModel, RigidTransform, Option<RigidTransform>)> = Vec::new();
    for o in &truth.objects {
        let Some(model) = models.iter().find(|m| m.id == o.class_id) else {
            warn!("no model for class {}; object skipped", o.class_id);
            continue;
        };
        let pred = preds
            .iter()
            .enumerate()
            .find(|(i, p)| !used[*i] && p.class_id == o.class_id)
            .map(|(i, p)| {
                used[i] = true;
                p.transform()
            });
        jobs.push((model, o.pose, pred));
    }
    let vsd_params = VsdParams {
        tau: a.tau,
        theta: a.theta,
        ..VsdParams::default()
    };
    let objects = jobs
        .par_iter()
        .map(|(model, gt, pred)| {
            let Some(pred) = pred else {
                return Ok(ObjectReport {
                    class_id: model.id.clone(),
                    predicted: false,
                    add: None,
                    add_s: None,
                    vsd: None,
                    correct_add: metrics.add.then_some(false),
                    correct_vsd: metrics.vsd.then_some(false),
                });
            };
            let e = pose_error(gt, pred, model);
            let vsd = match &scene {
                Some((depth, k)) => match vsd_error(gt, pred, model, depth, k, &vsd_params) {
                    Ok(v) => Some(v),
                    Err(stocs_core::Error::NotVisible) => None,
                    Err(e) => return Err(Error::from(e)),
                },
                None => None,
            };
            Ok(ObjectReport {
                class_id: model.id.clone(),
                predicted: true,
                add: metrics.add.then_some(e.add),
                add_s: metrics.adds.then_some(e.add_s),
                vsd,
                correct_add: metrics.add.then(|| pose_correct_add(gt, pred, model, ADD_FRACTION)),
                correct_vsd: metrics.vsd.then(|| vsd.is_some_and(|v| v < a.theta)),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let recall = |f: fn(&ObjectReport) -> Option<bool>| {
        let hits = objects.iter().filter(|o| f(o) == Some(true)).count();
        if objects.is_empty() {
            0.0
        } else {
            hits as f64 / objects.len() as f64
        }
    };
    let auc_add_s = if metrics.adds {
        let errors: Vec<f64> = objects.iter().map(|o| o.add_s.unwrap_or(f64::INFINITY)).collect();
        Some(auc(&accuracy_curve(&errors, AUC_MAX_THRESHOLD, AUC_BINS), AUC_MAX_THRESHOLD)?)
    } else {
        None
    };
    let report = Report {
        aggregate: Aggregate {
            objects: objects.len(),
            predictions: preds.len(),
            auc_add_s,
            recall_add: metrics.add.then(|| recall(|o| o.correct_add)),
            recall_vsd: metrics.vsd.then(|| recall(|o| o.correct_vsd)),
        },
        objects,
    };
    emit(a.out.as_deref(), &to_json(&report))
}

fn load_model_dir(dir: &Path) -> Result<Vec<ObjectModel>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::read(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::read(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "spm") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::malformed(dir, "no .spm models in directory"));
    }
    paths.iter().map(|p| load_model(p)).collect()
}

fn simulate(a: &SimulateArgs, seed: u64) -> Result<()> {
    let mode = parse_heatmap_mode(&a.heatmap_mode)
        .ok_or_else(|| Error::malformed(Path::new("--heatmap-mode"), "expected perfect, blurred or corrupted:p"))?;
    if !(a.noise_sigma >= 0.0 && a.noise_sigma.is_finite()) {
        return Err(invalid("noise"));
    }
    let models = load_model_dir(&a.models)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::write(&a.out, e))?;
    (0..a.n_scenes).into_par_iter().try_for_each(|i| {
        let scene = simulate_scene(&models, seed, i, a.noise_sigma, mode)?;
        write_scene(&a.out, i, &scene)
    })?;
    info!("wrote {} scenes to {}", a.n_scenes, a.out.display());
    Ok(())
}

fn score_heatmap(a: &ScoreHeatmapArgs) -> Result<()> {
    let heatmap = load_heatmap(&a.heatmap)?;
    let cfg = WildcatPoolingConfig {
        k_max: a.k_max,
        k_min: a.k_min,
        alpha: a.alpha,
    };
    let mut scores = BTreeMap::new();
    for grid in &heatmap.classes {
        scores.insert(grid.class_id.clone(), logistic(spatial_pool_grid(&grid.values, &cfg)?));
    }
    emit(a.out.as_deref(), &to_json(&scores))
}
