//! Scene directories: `NNNN_depth.png`, `NNNN_intrinsics.json`,
//! `NNNN_heatmap.fhm` and `NNNN_gt.json` per scene.

use std::path::{Path, PathBuf};

use stocs_core::ingest::{CameraIntrinsics, DepthImage, RawHeatmap};
use stocs_core::simulator::GroundTruth;

use crate::depth::{load_depth, save_depth};
use crate::error::{Error, Result};
use crate::heatmap::{load_heatmap, save_heatmap};
use crate::records::{read_json, write_json, GroundTruthRecord, IntrinsicsRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub depth: DepthImage,
    pub intrinsics: CameraIntrinsics,
    pub heatmap: RawHeatmap,
    pub truth: GroundTruth,
}

pub const SUFFIXES: [&str; 4] = ["depth.png", "intrinsics.json", "heatmap.fhm", "gt.json"];

pub fn scene_path(dir: &Path, index: u32, suffix: &str) -> PathBuf {
    dir.join(format!("{index:04}_{suffix}"))
}

pub fn write_scene(dir: &Path, index: u32, scene: &Scene) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::write(dir, e))?;
    save_depth(&scene.depth, &scene_path(dir, index, SUFFIXES[0]))?;
    write_json(&scene_path(dir, index, SUFFIXES[1]), &IntrinsicsRecord::from(scene.intrinsics))?;
    save_heatmap(&scene.heatmap, &scene_path(dir, index, SUFFIXES[2]))?;
    write_json(&scene_path(dir, index, SUFFIXES[3]), &GroundTruthRecord::from(&scene.truth))
}

pub fn read_scene(dir: &Path, index: u32) -> Result<Scene> {
    let intrinsics: IntrinsicsRecord = read_json(&scene_path(dir, index, SUFFIXES[1]))?;
    let truth: GroundTruthRecord = read_json(&scene_path(dir, index, SUFFIXES[3]))?;
    Ok(Scene {
        depth: load_depth(&scene_path(dir, index, SUFFIXES[0]))?,
        intrinsics: intrinsics.into(),
        heatmap: load_heatmap(&scene_path(dir, index, SUFFIXES[2]))?,
        truth: (&truth).into(),
    })
}

/// Indices of scenes with a depth file in `dir`, ascending.
pub fn list_scenes(dir: &Path) -> Result<Vec<u32>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::read(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::read(dir, e))?;
        let name = entry.file_name();
        let Some(stem) = name.to_str().and_then(|n| n.strip_suffix("_depth.png")) else {
            continue;
        };
        if let Ok(i) = stem.parse() {
            out.push(i);
        }
    }
    out.sort_unstable();
    Ok(out)
}
