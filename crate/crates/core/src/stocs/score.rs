use alloc::vec::Vec;

use crate::geometry::{Point3, RigidTransform, SpatialIndex};
use crate::model::ObjectModel;

/// Sum over model points of the probability of the nearest scene point,
/// counting only neighbors strictly closer than `delta_s`.
pub fn score_hypothesis(
    t: &RigidTransform,
    model: &ObjectModel,
    scene_index: &SpatialIndex,
    probs: &[f64],
    delta_s: f64,
) -> f64 {
    model
        .cloud
        .points
        .iter()
        .map(|m| {
            scene_index
                .nearest_within(&t.transform_point(m), delta_s)
                .map_or(0.0, |(j, _)| probs[j])
        })
        .sum()
}

/// Uniform grid over the positive-probability region of a scene, answering
/// the same nearest-within-`delta_s` queries as [`SpatialIndex`] for the
/// purpose of scoring. Queries that cannot reach a positive-probability point
/// return zero without a search.
#[derive(Debug, Clone)]
pub(crate) struct ScoreGrid {
    origin: Point3,
    cell: f64,
    dims: [usize; 3],
    lo: Point3,
    hi: Point3,
    r2: f64,
    offsets: Vec<u32>,
    /// Scene indices per cell, ascending.
    entries: Vec<u32>,
    /// Cell holds at least one positive-probability point.
    support: Vec<bool>,
}

impl ScoreGrid {
    pub(crate) fn new(points: &[Point3], probs: &[f64], delta_s: f64) -> Self {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for (p, &w) in points.iter().zip(probs) {
            if w > 0.0 {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
        }
        // a ball of radius delta_s touches at most two cells per axis
        let cell = 2.0 * delta_s * (1.0 + 1e-6);
        let pad = 2.0 * cell;
        let origin = lo.map(|c| c - pad);
        let dims = [0, 1, 2].map(|a| {
            if hi[a] < lo[a] {
                1
            } else {
                (libm::floor((hi[a] - lo[a] + 2.0 * pad) / cell) as usize) + 1
            }
        });
        let cells = dims[0] * dims[1] * dims[2];
        let mut grid = Self {
            origin,
            cell,
            dims,
            lo: lo.map(|c| c - delta_s),
            hi: hi.map(|c| c + delta_s),
            r2: delta_s * delta_s,
            offsets: alloc::vec![0; cells + 1],
            entries: Vec::new(),
            support: alloc::vec![false; cells],
        };
        let slots: Vec<Option<usize>> = points.iter().map(|p| grid.cell_of(p)).collect();
        for s in slots.iter().flatten() {
            grid.offsets[s + 1] += 1;
        }
        for c in 0..cells {
            grid.offsets[c + 1] += grid.offsets[c];
        }
        let mut cursor = grid.offsets.clone();
        grid.entries = alloc::vec![0; grid.offsets[cells] as usize];
        for (i, s) in slots.iter().enumerate() {
            if let Some(s) = *s {
                grid.entries[cursor[s] as usize] = i as u32;
                cursor[s] += 1;
                if probs[i] > 0.0 {
                    grid.support[s] = true;
                }
            }
        }
        grid
    }

    fn coord(&self, p: &Point3, axis: usize) -> Option<(usize, f64)> {
        let x = (p[axis] - self.origin[axis]) / self.cell;
        let c = libm::floor(x);
        (c >= 0.0 && (c as usize) < self.dims[axis]).then_some((c as usize, x - c))
    }

    fn cell_of(&self, p: &Point3) -> Option<usize> {
        let (x, _) = self.coord(p, 0)?;
        let (y, _) = self.coord(p, 1)?;
        let (z, _) = self.coord(p, 2)?;
        Some((z * self.dims[1] + y) * self.dims[0] + x)
    }

    /// Nearest scene index strictly within `delta_s` of `q`, if it can have
    /// positive probability; `None` means the term contributes zero.
    #[inline]
    pub(crate) fn nearest(&self, points: &[Point3], q: &Point3) -> Option<usize> {
        if (0..3).any(|a| q[a] < self.lo[a] || q[a] > self.hi[a]) {
            return None;
        }
        let mut span = [(0usize, 0usize); 3];
        for (a, s) in span.iter_mut().enumerate() {
            let (c, f) = self.coord(q, a)?;
            *s = if f < 0.5 { (c.saturating_sub(1), c) } else { (c, (c + 1).min(self.dims[a] - 1)) };
        }
        let mut cells = [0usize; 8];
        let mut n = 0;
        let mut any = false;
        for z in [span[2].0, span[2].1] {
            for y in [span[1].0, span[1].1] {
                for x in [span[0].0, span[0].1] {
                    let c = (z * self.dims[1] + y) * self.dims[0] + x;
                    if !cells[..n].contains(&c) {
                        cells[n] = c;
                        n += 1;
                        any |= self.support[c];
                    }
                }
            }
        }
        if !any {
            return None;
        }
        let mut best = usize::MAX;
        let mut best_d2 = f64::INFINITY;
        for &c in &cells[..n] {
            for &i in &self.entries[self.offsets[c] as usize..self.offsets[c + 1] as usize] {
                let i = i as usize;
                let d2 = (points[i] - q).norm_squared();
                if d2 < self.r2 && (d2 < best_d2 || (d2 == best_d2 && i < best)) {
                    best = i;
                    best_d2 = d2;
                }
            }
        }
        (best != usize::MAX).then_some(best)
    }
}

/// Like [`score_hypothesis`] but abandons the sum once it provably cannot
/// reach `bound` (`max_prob` caps each term). Returns the exact score when
/// it can tie or beat `bound`.
pub(crate) fn score_bounded(
    t: &RigidTransform,
    model: &ObjectModel,
    grid: &ScoreGrid,
    points: &[Point3],
    probs: &[f64],
    max_prob: f64,
    bound: f64,
) -> Option<f64> {
    let n = model.cloud.points.len();
    let mut score = 0.0;
    for (k, m) in model.cloud.points.iter().enumerate() {
        if let Some(j) = grid.nearest(points, &t.transform_point(m)) {
            score += probs[j];
        }
        if k % 32 == 31 && score + (n - k - 1) as f64 * max_prob < bound {
            return None;
        }
    }
    (score >= bound).then_some(score)
}
