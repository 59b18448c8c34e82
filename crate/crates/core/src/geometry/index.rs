use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;
const LEAF: u8 = 3;

#[derive(Debug, Clone)]
struct Node {
    start: u32,
    end: u32,
    axis: u8,
    split: f64,
    left: u32,
    right: u32,
}

/// Static kd-tree over a point set.
///
/// Distance ties are broken toward the lowest original point index, so every
/// query agrees exactly with a linear scan.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        Self::from_points(&cloud.points)
    }

    pub fn from_points(points: &[Point3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut index = SpatialIndex {
            points: points.to_vec(),
            order: (0..points.len() as u32).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        index.build_node(0, points.len());
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point3 {
        &self.points[i]
    }

    fn build_node(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            start: start as u32,
            end: end as u32,
            axis: LEAF,
            split: 0.0,
            left: 0,
            right: 0,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = &self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap_or(Ordering::Equal))
            .unwrap_or(0);
        if hi[axis] - lo[axis] <= 0.0 {
            // all coincident
            return id;
        }
        let mid = (start + end) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a as usize][axis]
                .partial_cmp(&points[b as usize][axis])
                .unwrap_or(Ordering::Equal)
        });
        let split = self.points[self.order[mid] as usize][axis];
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        let node = &mut self.nodes[id as usize];
        node.axis = axis as u8;
        node.split = split;
        node.left = left;
        node.right = right;
        id
    }

    /// Nearest indexed point: `(index, distance)`.
    pub fn nearest(&self, q: &Point3) -> (usize, f64) {
        let mut best = Best {
            idx: usize::MAX,
            d2: f64::INFINITY,
            limit: f64::INFINITY,
        };
        self.nearest_rec(0, q, &mut best);
        (best.idx, libm::sqrt(best.d2))
    }

    /// Nearest point strictly closer than `radius`, if any.
    pub fn nearest_within(&self, q: &Point3, radius: f64) -> Option<(usize, f64)> {
        let mut best = Best {
            idx: usize::MAX,
            d2: f64::INFINITY,
            limit: radius * radius,
        };
        self.nearest_rec(0, q, &mut best);
        (best.idx != usize::MAX).then(|| (best.idx, libm::sqrt(best.d2)))
    }

    fn nearest_rec(&self, node: u32, q: &Point3, best: &mut Best) {
        let n = &self.nodes[node as usize];
        if n.axis == LEAF {
            for &i in &self.order[n.start as usize..n.end as usize] {
                let d2 = (self.points[i as usize] - q).norm_squared();
                best.offer(i as usize, d2);
            }
            return;
        }
        let diff = q[n.axis as usize] - n.split;
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.nearest_rec(near, q, best);
        if diff * diff <= best.bound() {
            self.nearest_rec(far, q, best);
        }
    }

    /// Indices of all points with distance `<= radius`, ascending.
    pub fn within_radius(&self, q: &Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.radius_rec(0, q, radius * radius, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: u32, q: &Point3, r2: f64, out: &mut Vec<usize>) {
        let n = &self.nodes[node as usize];
        if n.axis == LEAF {
            for &i in &self.order[n.start as usize..n.end as usize] {
                if (self.points[i as usize] - q).norm_squared() <= r2 {
                    out.push(i as usize);
                }
            }
            return;
        }
        let diff = q[n.axis as usize] - n.split;
        if diff <= 0.0 || diff * diff <= r2 {
            self.radius_rec(n.left, q, r2, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.radius_rec(n.right, q, r2, out);
        }
    }

    /// The `k` nearest points sorted by `(distance, index)`.
    pub fn knn(&self, q: &Point3, k: usize) -> Vec<(usize, f64)> {
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.knn_rec(0, q, k, &mut heap);
        }
        heap.into_iter().map(|(d2, i)| (i, libm::sqrt(d2))).collect()
    }

    fn knn_rec(&self, node: u32, q: &Point3, k: usize, found: &mut Vec<(f64, usize)>) {
        let n = &self.nodes[node as usize];
        if n.axis == LEAF {
            for &i in &self.order[n.start as usize..n.end as usize] {
                let cand = ((self.points[i as usize] - q).norm_squared(), i as usize);
                if found.len() == k && !lex_less(&cand, &found[k - 1]) {
                    continue;
                }
                let pos = found.partition_point(|e| lex_less(e, &cand));
                found.insert(pos, cand);
                found.truncate(k);
            }
            return;
        }
        let diff = q[n.axis as usize] - n.split;
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.knn_rec(near, q, k, found);
        if found.len() < k || diff * diff <= found[k - 1].0 {
            self.knn_rec(far, q, k, found);
        }
    }
}

#[inline]
fn lex_less(a: &(f64, usize), b: &(f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

struct Best {
    idx: usize,
    d2: f64,
    limit: f64,
}

impl Best {
    #[inline]
    fn offer(&mut self, idx: usize, d2: f64) {
        if d2 < self.limit && (d2 < self.d2 || (d2 == self.d2 && idx < self.idx)) {
            self.idx = idx;
            self.d2 = d2;
        }
    }

    #[inline]
    fn bound(&self) -> f64 {
        if self.idx == usize::MAX {
            self.limit
        } else {
            self.d2
        }
    }
}

pub fn build_index(cloud: &PointCloud) -> Result<SpatialIndex> {
    SpatialIndex::build(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(points: &[Point3], q: &Point3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d2 = (p - q).norm_squared();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        (best.0, libm::sqrt(best.1))
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn empty_cloud_is_rejected() {
        assert!(matches!(SpatialIndex::from_points(&[]), Err(Error::EmptyCloud)));
    }

    #[test]
    fn single_point_answers_every_query() {
        let idx = SpatialIndex::from_points(&[Point3::new(1.0, 2.0, 3.0)]).unwrap();
        assert_eq!(idx.nearest(&Point3::new(-5.0, 0.0, 9.0)).0, 0);
        assert_eq!(idx.nearest(&Point3::new(1.0, 2.0, 3.0)), (0, 0.0));
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pts = random_points(&mut rng, 1000);
        let idx = SpatialIndex::from_points(&pts).unwrap();
        for _ in 0..100 {
            let q = random_points(&mut rng, 1).pop().unwrap();
            assert_eq!(idx.nearest(&q), brute_nearest(&pts, &q));
            let r = 0.2;
            let expect: Vec<usize> = (0..pts.len())
                .filter(|&i| (pts[i] - q).norm() <= r)
                .collect();
            assert_eq!(idx.within_radius(&q, r), expect);
            let knn = idx.knn(&q, 5);
            let mut all: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, p)| (i, (p - q).norm())).collect();
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            assert_eq!(knn.iter().map(|e| e.0).collect::<Vec<_>>(), all[..5].iter().map(|e| e.0).collect::<Vec<_>>());
        }
    }

    #[test]
    fn indexed_point_has_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_points(&mut rng, 200);
        let idx = SpatialIndex::from_points(&pts).unwrap();
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(idx.nearest(p), (i, 0.0));
        }
    }

    #[test]
    fn nearest_within_respects_radius() {
        let pts = [Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        let idx = SpatialIndex::from_points(&pts).unwrap();
        assert_eq!(idx.nearest_within(&Point3::new(0.4, 0.0, 0.0), 0.5).map(|e| e.0), Some(0));
        assert!(idx.nearest_within(&Point3::new(0.5, 2.0, 0.0), 0.5).is_none());
    }

    #[test]
    fn duplicate_points_tie_to_lowest_index() {
        let pts = alloc::vec![Point3::new(0.5, 0.5, 0.5); 40];
        let idx = SpatialIndex::from_points(&pts).unwrap();
        assert_eq!(idx.nearest(&Point3::origin()).0, 0);
        assert_eq!(idx.knn(&Point3::origin(), 3).iter().map(|e| e.0).collect::<Vec<_>>(), [0, 1, 2]);
    }
}
