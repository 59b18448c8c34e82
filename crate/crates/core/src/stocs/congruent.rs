use alloc::vec::Vec;

use super::config::StocsConfig;
use super::sampler::BASE_PAIRS;
use crate::geometry::{Point3, UnitVector3};
use crate::model::{compute_ppf, ObjectModel, PointPairFeature, PpfSteps};

/// Model-point indices matched to the four base points, in base order.
pub type Quadruple = [u32; 4];

/// Features of every ordered model pair, plus the pairs bucketed by
/// quantized feature in a flat offset table.
#[derive(Debug, Clone)]
pub struct CongruentIndex {
    steps: PpfSteps,
    n: usize,
    angle_bins: u32,
    distance_bins: u32,
    /// `n × n`, row-major; coincident pairs hold NaN and never match.
    features: Vec<[f64; 4]>,
    /// Pair distances in single precision, for a cheap first rejection.
    distances: Vec<f32>,
    /// `offsets[key]..offsets[key + 1]` indexes `pairs`.
    offsets: Vec<u32>,
    /// Pair codes `i * n + j`.
    pairs: Vec<u32>,
}

impl CongruentIndex {
    pub fn build(model: &ObjectModel) -> Self {
        let steps = model.ppf.steps;
        let c = &model.cloud;
        let n = c.len();
        let angle_bins = steps.angle_bins();
        let mut features = alloc::vec![[f64::NAN; 4]; n * n];
        let mut keys = alloc::vec![u32::MAX; n * n];
        let mut distance_bins = 1;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if let Ok(f) = compute_ppf(&c.points[i], &c.normals[i], &c.points[j], &c.normals[j]) {
                    features[i * n + j] = [f.distance, f.angle_n1_d, f.angle_n2_d, f.angle_n1_n2];
                    distance_bins = distance_bins.max(steps.distance_bin(f.distance) + 1);
                }
            }
        }
        let mut index = Self {
            steps,
            n,
            angle_bins,
            distance_bins,
            distances: features.iter().map(|f| f[0] as f32).collect(),
            features,
            offsets: Vec::new(),
            pairs: Vec::new(),
        };
        let slots = (distance_bins * angle_bins * angle_bins * angle_bins) as usize;
        let mut counts = alloc::vec![0u32; slots + 1];
        for (code, f) in index.features.iter().enumerate() {
            if f[0].is_nan() {
                continue;
            }
            let key = index.slot(f);
            keys[code] = key;
            counts[key as usize + 1] += 1;
        }
        for s in 0..slots {
            counts[s + 1] += counts[s];
        }
        let mut cursor = counts.clone();
        let mut pairs = alloc::vec![0u32; counts[slots] as usize];
        for (code, &key) in keys.iter().enumerate() {
            if key != u32::MAX {
                pairs[cursor[key as usize] as usize] = code as u32;
                cursor[key as usize] += 1;
            }
        }
        index.offsets = counts;
        index.pairs = pairs;
        index
    }

    fn slot(&self, f: &[f64; 4]) -> u32 {
        let a = self.angle_bins;
        let s = &self.steps;
        ((s.distance_bin(f[0]) * a + s.angle_bin(f[1])) * a + s.angle_bin(f[2])) * a + s.angle_bin(f[3])
    }

    /// Feature of the ordered model pair `(i, j)`; `None` if coincident.
    pub fn feature(&self, i: u32, j: u32) -> Option<PointPairFeature> {
        let f = self.features[i as usize * self.n + j as usize];
        (!f[0].is_nan()).then(|| PointPairFeature {
            distance: f[0],
            angle_n1_d: f[1],
            angle_n2_d: f[2],
            angle_n1_n2: f[3],
        })
    }

    /// Codes `i * n + j` of all model pairs whose feature lies within the
    /// tolerance box of `f`, in table order.
    fn matching_pairs(&self, f: &[f64; 4], dist_tol: f64, angle_tol: f64) -> Vec<u32> {
        let s = &self.steps;
        let a = self.angle_bins;
        let d_lo = s.distance_bin((f[0] - dist_tol).max(0.0));
        let d_hi = s.distance_bin(f[0] + dist_tol).min(self.distance_bins - 1);
        let mut out = Vec::new();
        if d_lo > d_hi {
            return out;
        }
        let range = |x: f64| (s.angle_bin(x - angle_tol), s.angle_bin(x + angle_tol));
        let (a1_lo, a1_hi) = range(f[1]);
        let (a2_lo, a2_hi) = range(f[2]);
        let (a3_lo, a3_hi) = range(f[3]);
        for d in d_lo..=d_hi {
            for a1 in a1_lo..=a1_hi {
                for a2 in a2_lo..=a2_hi {
                    // the innermost angle range is contiguous in the table
                    let row = ((d * a + a1) * a + a2) * a;
                    let lo = self.offsets[(row + a3_lo) as usize] as usize;
                    let hi = self.offsets[(row + a3_hi + 1) as usize] as usize;
                    for &code in &self.pairs[lo..hi] {
                        if agree(&self.features[code as usize], f, dist_tol, angle_tol) {
                            out.push(code);
                        }
                    }
                }
            }
        }
        out
    }

    /// Every model quadruple congruent to the base, lexicographically sorted,
    /// truncated at `limit`.
    pub fn find(
        &self,
        base_points: &[Point3; 4],
        base_normals: &[UnitVector3; 4],
        dist_tol: f64,
        angle_tol: f64,
        limit: usize,
    ) -> Vec<Quadruple> {
        let mut feats = [[0.0; 4]; 6];
        for (slot, &(a, b)) in BASE_PAIRS.iter().enumerate() {
            match compute_ppf(&base_points[a], &base_normals[a], &base_points[b], &base_normals[b]) {
                Ok(f) => feats[slot] = [f.distance, f.angle_n1_d, f.angle_n2_d, f.angle_n1_n2],
                Err(_) => return Vec::new(),
            }
        }
        let [f01, f02, f03, f12, f13, f23] = feats;
        let mut out = Vec::new();
        let p01 = self.matching_pairs(&f01, dist_tol, angle_tol);
        if p01.is_empty() {
            return out;
        }
        let p02 = self.matching_pairs(&f02, dist_tol, angle_tol);
        if p02.is_empty() {
            return out;
        }
        let p03 = self.matching_pairs(&f03, dist_tol, angle_tol);
        if p03.is_empty() {
            return out;
        }
        let n = self.n as u32;
        // distances rounded to f32 err by far less than this slack
        let slack = dist_tol as f32 + 1e-6 * (1.0 + f01[0].max(f02[0]).max(f03[0]) as f32);
        let ok = |i: u32, j: u32, f: &[f64; 4]| {
            let c = (i * n + j) as usize;
            (self.distances[c] - f[0] as f32).abs() <= slack && agree(&self.features[c], f, dist_tol, angle_tol)
        };
        let (rows02, p02) = group_rows(&p02, n);
        let (rows03, p03) = group_rows(&p03, n);
        for &c01 in &p01 {
            let (i, j) = (c01 / n, c01 % n);
            let ks = &p02[rows02[i as usize] as usize..rows02[i as usize + 1] as usize];
            if ks.is_empty() {
                continue;
            }
            let ls = &p03[rows03[i as usize] as usize..rows03[i as usize + 1] as usize];
            for &c02 in ks {
                let k = c02 % n;
                if k == j || !ok(j, k, &f12) {
                    continue;
                }
                for &c03 in ls {
                    let l = c03 % n;
                    if l == j || l == k || !ok(j, l, &f13) || !ok(k, l, &f23) {
                        continue;
                    }
                    out.push([i, j, k, l]);
                }
            }
        }
        out.sort_unstable();
        out.truncate(limit);
        out
    }
}

/// Counting sort of pair codes by first index: row offsets (`n + 1`
/// entries) and the regrouped codes, stable within a row.
fn group_rows(list: &[u32], n: u32) -> (Vec<u32>, Vec<u32>) {
    let mut starts = alloc::vec![0u32; n as usize + 1];
    for &c in list {
        starts[(c / n) as usize + 1] += 1;
    }
    for i in 0..n as usize {
        starts[i + 1] += starts[i];
    }
    let mut cursor = starts.clone();
    let mut grouped = alloc::vec![0u32; list.len()];
    for &c in list {
        let r = (c / n) as usize;
        grouped[cursor[r] as usize] = c;
        cursor[r] += 1;
    }
    (starts, grouped)
}

#[inline]
fn agree(a: &[f64; 4], b: &[f64; 4], dist_tol: f64, angle_tol: f64) -> bool {
    (a[0] - b[0]).abs() <= dist_tol
        && (a[1] - b[1]).abs() <= angle_tol
        && (a[2] - b[2]).abs() <= angle_tol
        && (a[3] - b[3]).abs() <= angle_tol
}

/// Model quadruples congruent to `base_points` under the configured
/// tolerances, capped at `cfg.max_congruent_sets`.
pub fn find_congruent_sets(
    base_points: &[Point3; 4],
    base_normals: &[UnitVector3; 4],
    index: &CongruentIndex,
    cfg: &StocsConfig,
) -> Vec<Quadruple> {
    index.find(
        base_points,
        base_normals,
        cfg.distance_tolerance,
        cfg.angle_tolerance,
        cfg.max_congruent_sets,
    )
}
