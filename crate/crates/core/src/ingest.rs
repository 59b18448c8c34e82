//! Depth back-projection and class heatmap handling.
//!
//! Heatmap cell `(i, j)` (column, row) is centered on image pixel
//! `(s·i + s/2, s·j + s/2)` where `s` is the scale factor (32 by default).

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

pub const DEFAULT_SCALE_FACTOR: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Meters per stored depth unit.
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy, self.depth_scale]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidParameter("focal lengths must be positive"));
        }
        if self.depth_scale <= 0.0 {
            return Err(Error::InvalidParameter("depth scale must be positive"));
        }
        Ok(())
    }

    /// Continuous pixel coordinates of a camera-frame point.
    #[inline]
    pub fn project(&self, p: &Point3) -> (f64, f64) {
        (
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }

    #[inline]
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Point3 {
        Point3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }
}

/// Row-major 16-bit depth; zero marks an invalid pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u16>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32, data: Vec<u16>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: alloc::vec![0; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> u16 {
        self.data[v as usize * self.width as usize + u as usize]
    }

    /// Depth in meters at `(u, v)`, `None` when invalid.
    #[inline]
    pub fn meters(&self, u: u32, v: u32, k: &CameraIntrinsics) -> Option<f64> {
        match self.get(u, v) {
            0 => None,
            d => Some(d as f64 * k.depth_scale),
        }
    }
}

/// Back-projects valid pixels on a `stride` grid; each point records its pixel.
pub fn backproject(depth: &DepthImage, k: &CameraIntrinsics, stride: u32) -> Result<PointCloud> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1"));
    }
    k.validate()?;
    let mut cloud = PointCloud::default();
    for v in (0..depth.height).step_by(stride as usize) {
        for u in (0..depth.width).step_by(stride as usize) {
            if let Some(z) = depth.meters(u, v, k) {
                cloud.points.push(k.unproject(u as f64, v as f64, z));
                cloud.pixels.push((u, v));
            }
        }
    }
    if cloud.is_empty() {
        return Err(Error::AllPixelsInvalid);
    }
    Ok(cloud)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassGrid {
    pub class_id: String,
    /// Row-major, `width × height`.
    pub values: Vec<f64>,
}

/// Raw detector activations per class.
#[derive(Debug, Clone, PartialEq)]
pub struct RawHeatmap {
    pub width: u32,
    pub height: u32,
    pub classes: Vec<ClassGrid>,
}

impl RawHeatmap {
    pub fn new(width: u32, height: u32, classes: Vec<ClassGrid>) -> Result<Self> {
        let cells = width as usize * height as usize;
        for c in &classes {
            if c.values.len() != cells {
                return Err(Error::LengthMismatch {
                    expected: cells,
                    got: c.values.len(),
                });
            }
            if c.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self {
            width,
            height,
            classes,
        })
    }

    pub fn class(&self, id: &str) -> Option<&ClassGrid> {
        self.classes.iter().find(|c| c.class_id == id)
    }

    pub fn class_ids(&self) -> Vec<&str> {
        self.classes.iter().map(|c| c.class_id.as_str()).collect()
    }
}

/// Per-class probabilities in `[0, 1]` on the heatmap grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityHeatmap {
    pub width: u32,
    pub height: u32,
    /// Image pixels per heatmap cell.
    pub scale_factor: f64,
    pub classes: Vec<ClassGrid>,
    /// Classes whose raw grid was constant and normalized to zeros.
    pub degenerate: Vec<String>,
}

impl ProbabilityHeatmap {
    pub fn with_scale_factor(mut self, scale_factor: f64) -> Self {
        self.scale_factor = scale_factor;
        self
    }

    pub fn class(&self, id: &str) -> Result<&ClassGrid> {
        self.classes
            .iter()
            .find(|c| c.class_id == id)
            .ok_or_else(|| Error::UnknownClass(id.to_string()))
    }

    /// Bilinear lookup at continuous cell coordinates, clamped to the grid.
    pub fn sample_cell(&self, grid: &ClassGrid, gx: f64, gy: f64) -> f64 {
        bilinear(&grid.values, self.width, self.height, gx, gy)
    }
}

/// Per-class min-max normalization. Constant grids become all zeros.
pub fn normalize_heatmap(raw: &RawHeatmap) -> ProbabilityHeatmap {
    let mut degenerate = Vec::new();
    let classes = raw
        .classes
        .iter()
        .map(|c| {
            let (lo, hi) = c
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let range = hi - lo;
            let values = if range > 0.0 {
                c.values.iter().map(|&w| ((w - lo) / range).clamp(0.0, 1.0)).collect()
            } else {
                degenerate.push(c.class_id.clone());
                alloc::vec![0.0; c.values.len()]
            };
            ClassGrid {
                class_id: c.class_id.clone(),
                values,
            }
        })
        .collect();
    ProbabilityHeatmap {
        width: raw.width,
        height: raw.height,
        scale_factor: DEFAULT_SCALE_FACTOR,
        classes,
        degenerate,
    }
}

/// Resamples every map to the finest grid and averages per class.
///
/// Grids are treated as covering the same image with cell-centered samples.
pub fn combine_multiscale(maps: &[RawHeatmap]) -> Result<RawHeatmap> {
    let first = maps
        .first()
        .ok_or(Error::InvalidParameter("at least one heatmap required"))?;
    let mut ids: Vec<&str> = first.class_ids();
    ids.sort_unstable();
    for m in &maps[1..] {
        let mut other = m.class_ids();
        other.sort_unstable();
        if other != ids {
            return Err(Error::ClassSetMismatch);
        }
    }
    let finest = maps
        .iter()
        .max_by_key(|m| m.width as u64 * m.height as u64)
        .unwrap_or(first);
    let (w, h) = (finest.width, finest.height);
    let n = maps.len() as f64;
    let classes = first
        .classes
        .iter()
        .map(|c| {
            let mut acc = alloc::vec![0.0; w as usize * h as usize];
            for m in maps {
                let grid = m.class(&c.class_id).ok_or(Error::ClassSetMismatch)?;
                let sx = m.width as f64 / w as f64;
                let sy = m.height as f64 / h as f64;
                for y in 0..h {
                    let gy = (y as f64 + 0.5) * sy - 0.5;
                    for x in 0..w {
                        let gx = (x as f64 + 0.5) * sx - 0.5;
                        acc[(y * w + x) as usize] += bilinear(&grid.values, m.width, m.height, gx, gy);
                    }
                }
            }
            acc.iter_mut().for_each(|v| *v /= n);
            Ok(ClassGrid {
                class_id: c.class_id.clone(),
                values: acc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RawHeatmap {
        width: w,
        height: h,
        classes,
    })
}

pub(crate) fn bilinear(values: &[f64], width: u32, height: u32, gx: f64, gy: f64) -> f64 {
    let gx = gx.clamp(0.0, (width - 1) as f64);
    let gy = gy.clamp(0.0, (height - 1) as f64);
    let x0 = libm::floor(gx) as u32;
    let y0 = libm::floor(gy) as u32;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = gx - x0 as f64;
    let fy = gy - y0 as f64;
    let at = |x: u32, y: u32| values[(y * width + x) as usize];
    let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
    let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Probability of class `class_id` at image pixel `(u, v)`.
pub fn pixel_probability(h: &ProbabilityHeatmap, class_id: &str, u: f64, v: f64) -> Result<f64> {
    let grid = h.class(class_id)?;
    Ok(pixel_probability_in(h, grid, u, v))
}

#[inline]
fn pixel_probability_in(h: &ProbabilityHeatmap, grid: &ClassGrid, u: f64, v: f64) -> f64 {
    let s = h.scale_factor;
    let gx = (u - s / 2.0) / s;
    let gy = (v - s / 2.0) / s;
    h.sample_cell(grid, gx, gy).clamp(0.0, 1.0)
}

/// One probability per point, looked up at the point's source pixel.
pub fn annotate_cloud(cloud: &PointCloud, h: &ProbabilityHeatmap, class_id: &str) -> Result<Vec<f64>> {
    let grid = h.class(class_id)?;
    if !cloud.has_pixels() {
        return Err(Error::MissingPixels);
    }
    Ok(cloud
        .pixels
        .iter()
        .map(|&(u, v)| pixel_probability_in(h, grid, u as f64, v as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics { fx: 572.4, fy: 573.6, cx: 320.0, cy: 240.0, depth_scale: 1e-4 }
    }

    fn raw1(values: &[f64], w: u32, h: u32) -> RawHeatmap {
        RawHeatmap::new(w, h, alloc::vec![ClassGrid { class_id: "a".into(), values: values.to_vec() }]).unwrap()
    }

    #[test]
    fn principal_point_backprojects_on_axis() {
        let mut depth = DepthImage::zeros(640, 480);
        depth.data[240 * 640 + 320] = 8000;
        let cloud = backproject(&depth, &k(), 1).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.points[0], Point3::new(0.0, 0.0, 0.8));
        assert_eq!(cloud.pixels[0], (320, 240));
    }

    #[test]
    fn plane_and_projection_round_trip() {
        let depth = DepthImage::new(64, 48, alloc::vec![10000; 64 * 48]).unwrap();
        let kk = CameraIntrinsics { cx: 32.0, cy: 24.0, ..k() };
        let cloud = backproject(&depth, &kk, 3).unwrap();
        for (p, &(u, v)) in cloud.points.iter().zip(&cloud.pixels) {
            assert!((p.z - 1.0).abs() < 1e-4);
            let (pu, pv) = kk.project(p);
            assert!((pu - u as f64).abs() < 0.5 && (pv - v as f64).abs() < 0.5);
        }
        assert_eq!(cloud.len(), 22 * 16);
    }

    #[test]
    fn all_invalid_depth_is_an_error() {
        assert_eq!(backproject(&DepthImage::zeros(4, 4), &k(), 1), Err(Error::AllPixelsInvalid));
        assert!(backproject(&DepthImage::zeros(4, 4), &k(), 0).is_err());
    }

    #[test]
    fn min_max_examples() {
        let cases: [(&[f64], &[f64]); 3] = [
            (&[2.0, 4.0, 6.0], &[0.0, 0.5, 1.0]),
            (&[5.0, 5.0, 5.0], &[0.0, 0.0, 0.0]),
            (&[-1.0, 0.0, 3.0], &[0.0, 0.25, 1.0]),
        ];
        for (input, expect) in cases {
            let out = normalize_heatmap(&raw1(input, 3, 1));
            assert_eq!(out.classes[0].values, expect);
        }
        assert_eq!(normalize_heatmap(&raw1(&[5.0; 3], 3, 1)).degenerate, ["a"]);
    }

    #[test]
    fn multiscale_examples() {
        let a = raw1(&[1.0; 4], 2, 2);
        assert_eq!(combine_multiscale(core::slice::from_ref(&a)).unwrap(), a);
        assert_eq!(combine_multiscale(&[a.clone(), a.clone()]).unwrap(), a);
        let b = raw1(&[3.0; 16], 4, 4);
        let c = combine_multiscale(&[a.clone(), b]).unwrap();
        assert_eq!((c.width, c.height), (4, 4));
        assert!(c.classes[0].values.iter().all(|&v| (v - 2.0).abs() < 1e-12));
        let other = RawHeatmap::new(2, 2, alloc::vec![ClassGrid { class_id: "b".into(), values: alloc::vec![0.0; 4] }]).unwrap();
        assert_eq!(combine_multiscale(&[a, other]), Err(Error::ClassSetMismatch));
    }

    #[test]
    fn pixel_lookup_examples() {
        let h = normalize_heatmap(&raw1(&[0.0, 0.7, 1.0, 0.2], 4, 1));
        assert!((pixel_probability(&h, "a", 48.0, 16.0).unwrap() - 0.7).abs() < 1e-12);
        let h2 = normalize_heatmap(&raw1(&[0.0, 1.0], 2, 1));
        assert!((pixel_probability(&h2, "a", 32.0, 16.0).unwrap() - 0.5).abs() < 1e-12);
        let mut ones = normalize_heatmap(&raw1(&[0.0, 1.0], 2, 1));
        ones.classes[0].values = alloc::vec![1.0, 1.0];
        assert_eq!(pixel_probability(&ones, "a", 3.0, 40.0).unwrap(), 1.0);
        assert_eq!(pixel_probability(&ones, "zz", 3.0, 4.0), Err(Error::UnknownClass("zz".into())));
    }

    #[test]
    fn pixel_lookup_is_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<f64> = (0..20 * 15).map(|_| rng.random()).collect();
        let h = normalize_heatmap(&raw1(&vals, 20, 15));
        for _ in 0..1000 {
            let u = rng.random_range(0.0..640.0);
            let v = rng.random_range(0.0..480.0);
            let a = pixel_probability(&h, "a", u, v).unwrap();
            let b = pixel_probability(&h, "a", u + 1e-6, v + 1e-6).unwrap();
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn annotate_examples() {
        let depth = DepthImage::new(128, 96, alloc::vec![9000; 128 * 96]).unwrap();
        let cloud = backproject(&depth, &CameraIntrinsics { cx: 64.0, cy: 48.0, ..k() }, 2).unwrap();
        let mut boxed = alloc::vec![0.0; 4 * 3];
        boxed[4 + 1] = 1.0;
        let h = normalize_heatmap(&raw1(&boxed, 4, 3));
        let probs = annotate_cloud(&cloud, &h, "a").unwrap();
        for (&(u, v), p) in cloud.pixels.iter().zip(&probs) {
            // zero wherever the bilinear footprint excludes cell (1, 1)
            if !(16..80).contains(&u) || !(16..80).contains(&v) {
                assert_eq!(*p, 0.0, "({u},{v})");
            }
        }
        let mut uniform = h.clone();
        uniform.classes[0].values = alloc::vec![1.0; 12];
        assert!(annotate_cloud(&cloud, &uniform, "a").unwrap().iter().all(|&p| p == 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut random = h.clone();
        random.classes[0].values = (0..12).map(|_| rng.random()).collect();
        let got = annotate_cloud(&cloud, &random, "a").unwrap();
        for (&(u, v), p) in cloud.pixels.iter().zip(&got) {
            let gx = ((u as f64 - 16.0) / 32.0).clamp(0.0, 3.0);
            let gy = ((v as f64 - 16.0) / 32.0).clamp(0.0, 2.0);
            let (x0, y0) = (gx.floor() as usize, gy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(3), (y0 + 1).min(2));
            let (fx, fy) = (gx - x0 as f64, gy - y0 as f64);
            let g = &random.classes[0].values;
            let e = g[y0 * 4 + x0] * (1.0 - fx) * (1.0 - fy) + g[y0 * 4 + x1] * fx * (1.0 - fy)
                + g[y1 * 4 + x0] * (1.0 - fx) * fy + g[y1 * 4 + x1] * fx * fy;
            assert!((e - p).abs() < 1e-12);
        }
        let bare = PointCloud::from_points(alloc::vec![Point3::origin()]).unwrap();
        assert_eq!(annotate_cloud(&bare, &h, "a"), Err(Error::MissingPixels));
    }

    #[test]
    fn normalization_is_affine_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let vals: Vec<f64> = (0..30).map(|_| rng.random_range(-5.0..5.0)).collect();
            let a = rng.random_range(0.01..100.0);
            let b = rng.random_range(-50.0..50.0);
            let t: Vec<f64> = vals.iter().map(|w| a * w + b).collect();
            let p = normalize_heatmap(&raw1(&vals, 6, 5));
            let q = normalize_heatmap(&raw1(&t, 6, 5));
            for (x, y) in p.classes[0].values.iter().zip(&q.classes[0].values) {
                assert!((x - y).abs() <= 1e-12);
                assert!((0.0..=1.0).contains(x));
            }
        }
    }
}
