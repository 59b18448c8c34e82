//! SPM1 model container.
//!
//! Layout, little-endian: magic `SPM1`, u32 version, u32 id length + UTF-8 id,
//! f64 diameter, u32 point count, per point the f32 position then the f32
//! normal, f64 distance step, f64 angle step, u64 key count, then per key
//! 4×u32 key and u64 count in ascending key order.

use std::path::Path;

use stocs_core::geometry::{Point3, PointCloud, UnitVector3, Vector3};
use stocs_core::model::{ObjectModel, PpfSteps, PpfTable, QuantizedPPFKey};

use crate::bytes::{put_string, Cursor};
use crate::error::{read_file, write_file, Error, Result};

pub const MAGIC: &[u8; 4] = b"SPM1";
pub const VERSION: u32 = 1;

/// Rounds geometry to what SPM1 stores, so that a saved and reloaded model
/// compares equal to the in-memory one.
pub fn quantize_model(model: &ObjectModel) -> ObjectModel {
    let round = |v: f64| v as f32 as f64;
    let points = model.cloud.points.iter().map(|p| p.map(round)).collect();
    let normals = model
        .cloud
        .normals
        .iter()
        .map(|n| UnitVector3::new_unchecked(n.into_inner().map(round)))
        .collect();
    ObjectModel {
        id: model.id.clone(),
        cloud: PointCloud {
            points,
            normals,
            pixels: Vec::new(),
        },
        ppf: model.ppf.clone(),
        diameter: model.diameter,
    }
}

pub fn encode_model(model: &ObjectModel) -> Vec<u8> {
    let records = model.ppf.sorted_records();
    let mut out = Vec::with_capacity(64 + model.len() * 24 + records.len() * 24);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_string(&mut out, &model.id);
    out.extend_from_slice(&model.diameter.to_le_bytes());
    out.extend_from_slice(&(model.len() as u32).to_le_bytes());
    let zero = Vector3::zeros();
    for (i, p) in model.cloud.points.iter().enumerate() {
        let n = model.cloud.normals.get(i).map_or(zero, |n| n.into_inner());
        for v in p.iter().chain(n.iter()) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out.extend_from_slice(&model.ppf.steps.distance.to_le_bytes());
    out.extend_from_slice(&model.ppf.steps.angle.to_le_bytes());
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for (key, count) in records {
        for k in key.0 {
            out.extend_from_slice(&k.to_le_bytes());
        }
        out.extend_from_slice(&count.to_le_bytes());
    }
    out
}

/// Parses an SPM1 buffer; `path` is only used in diagnostics.
pub fn decode_model(path: &Path, data: &[u8]) -> Result<ObjectModel> {
    let mismatch = || Error::FormatVersionMismatch {
        path: path.to_path_buf(),
        expected: "SPM1",
    };
    let eof = || Error::truncated(path);
    let mut c = Cursor::new(data);
    if c.take(4) != Some(MAGIC.as_slice()) {
        return Err(mismatch());
    }
    if c.u32().ok_or_else(eof)? != VERSION {
        return Err(mismatch());
    }
    let id = c
        .string()
        .ok_or_else(eof)?
        .map_err(|_| Error::malformed(path, "model id is not UTF-8"))?;
    let diameter = c.f64().ok_or_else(eof)?;
    let n = c.u32().ok_or_else(eof)? as usize;
    if c.remaining() < n.saturating_mul(24) {
        return Err(eof());
    }
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v = [0f64; 6];
        for x in v.iter_mut() {
            *x = c.f32().ok_or_else(eof)? as f64;
        }
        points.push(Point3::new(v[0], v[1], v[2]));
        normals.push(UnitVector3::new_unchecked(Vector3::new(v[3], v[4], v[5])));
    }
    let steps = PpfSteps {
        distance: c.f64().ok_or_else(eof)?,
        angle: c.f64().ok_or_else(eof)?,
    };
    steps.validate()?;
    let keys = c.u64().ok_or_else(eof)?;
    if (c.remaining() as u64) < keys.saturating_mul(24) {
        return Err(eof());
    }
    let mut records = Vec::with_capacity(keys as usize);
    for _ in 0..keys {
        let key = [c.u32(), c.u32(), c.u32(), c.u32()].map(|k| k.unwrap_or(0));
        records.push((QuantizedPPFKey(key), c.u64().ok_or_else(eof)?));
    }
    if c.remaining() != 0 {
        return Err(Error::malformed(path, "trailing bytes after SPM1 records"));
    }
    let ppf = PpfTable::from_records(steps, records)?;
    Ok(ObjectModel {
        id,
        cloud: PointCloud {
            points,
            normals,
            pixels: Vec::new(),
        },
        ppf,
        diameter,
    })
}

pub fn save_model(model: &ObjectModel, path: &Path) -> Result<()> {
    write_file(path, &encode_model(model))
}

pub fn load_model(path: &Path) -> Result<ObjectModel> {
    decode_model(path, &read_file(path)?)
}
