//! 16-bit grayscale PNG depth images.

use std::io::BufWriter;
use std::path::Path;

use png::{BitDepth, ColorType, Decoder, Encoder, Transformations};
use stocs_core::ingest::DepthImage;

use crate::error::{read_file, Error, Result};

pub fn decode_depth(path: &Path, data: &[u8]) -> Result<DepthImage> {
    let bad = |reason: String| Error::malformed(path, reason);
    let mut decoder = Decoder::new(std::io::Cursor::new(data));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| bad(e.to_string()))?;
    let info = reader.info();
    if info.color_type != ColorType::Grayscale || info.bit_depth != BitDepth::Sixteen {
        return Err(bad("depth PNG must be 16-bit grayscale".into()));
    }
    let (width, height) = (info.width, info.height);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| bad("depth PNG is too large".into()))?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
    let data = buf[..frame.buffer_size()]
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    DepthImage::new(width, height, data).map_err(|e| bad(e.to_string()))
}

pub fn load_depth(path: &Path) -> Result<DepthImage> {
    decode_depth(path, &read_file(path)?)
}

pub fn encode_depth(depth: &DepthImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = Encoder::new(BufWriter::new(&mut out), depth.width, depth.height);
        enc.set_color(ColorType::Grayscale);
        enc.set_depth(BitDepth::Sixteen);
        let mut writer = enc.write_header().expect("in-memory PNG header");
        let bytes: Vec<u8> = depth.data.iter().flat_map(|v| v.to_be_bytes()).collect();
        writer.write_image_data(&bytes).expect("in-memory PNG data");
    }
    out
}

pub fn save_depth(depth: &DepthImage, path: &Path) -> Result<()> {
    crate::error::write_file(path, &encode_depth(depth))
}
