//! Heatmap files: FHM1 binary grids and per-class CSV grids.
//!
//! FHM1 layout, little-endian: magic `FHM1`, u32 width, u32 height, u32 class
//! count, then per class a u32 id length, the UTF-8 id and `width × height`
//! row-major f32 values.

use std::path::{Path, PathBuf};

use stocs_core::ingest::{ClassGrid, RawHeatmap};

use crate::bytes::{put_string, Cursor};
use crate::error::{read_file, write_file, Error, Result};

pub const MAGIC: &[u8; 4] = b"FHM1";

pub fn encode_heatmap(h: &RawHeatmap) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [h.width, h.height, h.classes.len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for g in &h.classes {
        put_string(&mut out, &g.class_id);
        for v in &g.values {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_heatmap(path: &Path, data: &[u8]) -> Result<RawHeatmap> {
    let mut c = Cursor::new(data);
    if c.take(4) != Some(MAGIC.as_slice()) {
        return Err(Error::FormatVersionMismatch {
            path: path.to_path_buf(),
            expected: "FHM1",
        });
    }
    let eof = || Error::truncated(path);
    let width = c.u32().ok_or_else(eof)?;
    let height = c.u32().ok_or_else(eof)?;
    let count = c.u32().ok_or_else(eof)?;
    let cells = width as usize * height as usize;
    let mut classes = Vec::new();
    for _ in 0..count {
        let class_id = c
            .string()
            .ok_or_else(eof)?
            .map_err(|_| Error::malformed(path, "class id is not UTF-8"))?;
        if c.remaining() < cells * 4 {
            return Err(eof());
        }
        let values = (0..cells).map(|_| c.f32().map(f64::from)).collect::<Option<Vec<_>>>().ok_or_else(eof)?;
        classes.push(ClassGrid { class_id, values });
    }
    if c.remaining() != 0 {
        return Err(Error::malformed(path, "trailing bytes after FHM1 grids"));
    }
    RawHeatmap::new(width, height, classes).map_err(|e| Error::malformed(path, e.to_string()))
}

pub fn save_heatmap(h: &RawHeatmap, path: &Path) -> Result<()> {
    write_file(path, &encode_heatmap(h))
}

pub fn load_heatmap(path: &Path) -> Result<RawHeatmap> {
    decode_heatmap(path, &read_file(path)?)
}

/// One class per CSV file, named by the file stem; rows are grid rows.
/// All files must share one grid size.
pub fn load_csv_heatmap(paths: &[PathBuf]) -> Result<RawHeatmap> {
    let mut dims: Option<(u32, u32)> = None;
    let mut classes = Vec::new();
    for path in paths {
        let bytes = read_file(path)?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(bytes.as_slice());
        let mut values = Vec::new();
        let mut width = None;
        let mut height = 0u32;
        for record in reader.records() {
            let record = record.map_err(|e| Error::malformed(path, e.to_string()))?;
            let row = record
                .iter()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::malformed(path, "non-numeric heatmap cell"))?;
            if *width.get_or_insert(row.len()) != row.len() {
                return Err(Error::malformed(path, "ragged heatmap rows"));
            }
            values.extend(row);
            height += 1;
        }
        let here = (width.unwrap_or(0) as u32, height);
        if *dims.get_or_insert(here) != here {
            return Err(Error::malformed(path, "heatmap size differs from the other classes"));
        }
        let class_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::malformed(path, "file name is not a class id"))?
            .to_string();
        classes.push(ClassGrid { class_id, values });
    }
    let (w, h) = dims.unwrap_or((0, 0));
    RawHeatmap::new(w, h, classes).map_err(|e| Error::malformed(paths.first().map_or(Path::new(""), |p| p), e.to_string()))
}
