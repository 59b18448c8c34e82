//! JSON documents read and written by the command-line tool.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use stocs_core::geometry::RigidTransform;
use stocs_core::ingest::CameraIntrinsics;
use stocs_core::simulator::{BBox, GroundTruth, ObjectTruth};

use crate::error::{read_file, write_file, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub depth_scale: f64,
}

impl From<CameraIntrinsics> for IntrinsicsRecord {
    fn from(k: CameraIntrinsics) -> Self {
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            depth_scale: k.depth_scale,
        }
    }
}

impl From<IntrinsicsRecord> for CameraIntrinsics {
    fn from(r: IntrinsicsRecord) -> Self {
        CameraIntrinsics {
            fx: r.fx,
            fy: r.fy,
            cx: r.cx,
            cy: r.cy,
            depth_scale: r.depth_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub class_id: String,
    /// `[w, x, y, z]`.
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
    pub score: f64,
    pub trials: usize,
    pub seed: u64,
}

impl PoseRecord {
    pub fn transform(&self) -> RigidTransform {
        RigidTransform::from_wxyz(self.quaternion, self.translation)
    }
}

/// Written instead of a pose when estimation fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureRecord {
    pub class_id: String,
    /// `insufficient-support` or `no-hypothesis`.
    pub reason: String,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EstimateRecord {
    Pose(PoseRecord),
    Failure(FailureRecord),
}

/// A prediction file holds one estimate record or an array of them.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PredictionFile {
    One(EstimateRecord),
    Many(Vec<EstimateRecord>),
}

impl PredictionFile {
    /// Successful poses only, in file order.
    pub fn poses(self) -> Vec<PoseRecord> {
        let all = match self {
            PredictionFile::One(r) => vec![r],
            PredictionFile::Many(v) => v,
        };
        all.into_iter()
            .filter_map(|r| match r {
                EstimateRecord::Pose(p) => Some(p),
                EstimateRecord::Failure(_) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectTruthRecord {
    pub class_id: String,
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
    /// `[x_min, y_min, x_max, y_max]`, inclusive; null when fully occluded.
    pub bbox: Option<[u32; 4]>,
    /// Runs of `[start, length]` over row-major pixel indices.
    pub mask: Vec<[u32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthRecord {
    pub width: u32,
    pub height: u32,
    pub objects: Vec<ObjectTruthRecord>,
}

/// Run-length encodes ascending pixel indices.
pub fn encode_runs(mask: &[u32]) -> Vec<[u32; 2]> {
    let mut runs: Vec<[u32; 2]> = Vec::new();
    for &i in mask {
        match runs.last_mut() {
            Some([start, len]) if *start + *len == i => *len += 1,
            _ => runs.push([i, 1]),
        }
    }
    runs
}

pub fn decode_runs(runs: &[[u32; 2]]) -> Vec<u32> {
    runs.iter().flat_map(|&[start, len]| start..start + len).collect()
}

impl From<&GroundTruth> for GroundTruthRecord {
    fn from(gt: &GroundTruth) -> Self {
        Self {
            width: gt.width,
            height: gt.height,
            objects: gt
                .objects
                .iter()
                .map(|o| ObjectTruthRecord {
                    class_id: o.class_id.clone(),
                    quaternion: o.pose.wxyz(),
                    translation: o.pose.translation.into(),
                    bbox: o.bbox.map(|b| [b.x_min, b.y_min, b.x_max, b.y_max]),
                    mask: encode_runs(&o.mask),
                })
                .collect(),
        }
    }
}

impl From<&GroundTruthRecord> for GroundTruth {
    fn from(r: &GroundTruthRecord) -> Self {
        GroundTruth {
            width: r.width,
            height: r.height,
            objects: r
                .objects
                .iter()
                .map(|o| ObjectTruth {
                    class_id: o.class_id.clone(),
                    pose: RigidTransform::from_wxyz(o.quaternion, o.translation),
                    mask: decode_runs(&o.mask),
                    bbox: o.bbox.map(|[x_min, y_min, x_max, y_max]| BBox {
                        x_min,
                        y_min,
                        x_max,
                        y_max,
                    }),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectReport {
    pub class_id: String,
    /// False when no prediction was matched to this object.
    pub predicted: bool,
    pub add: Option<f64>,
    pub add_s: Option<f64>,
    pub vsd: Option<f64>,
    pub correct_add: Option<bool>,
    pub correct_vsd: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub objects: usize,
    pub predictions: usize,
    pub auc_add_s: Option<f64>,
    pub recall_add: Option<f64>,
    pub recall_vsd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub objects: Vec<ObjectReport>,
    pub aggregate: Aggregate,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::malformed(path, e.to_string()))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("records serialize");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &to_json(value))
}
