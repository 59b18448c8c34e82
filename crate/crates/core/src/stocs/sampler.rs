use alloc::vec::Vec;
use rand::Rng;

use super::config::{SamplingMode, StocsConfig};
use super::GuidedScene;
use crate::error::{Error, Result};
use crate::model::{edge_potential_with, ObjectModel};

/// Pair order used for the six edge potentials of a base.
pub const BASE_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Four scene points drawn jointly, with the potentials that weighted them.
#[derive(Debug, Clone, PartialEq)]
pub struct Base {
    pub indices: [usize; 4],
    pub node: [f64; 4],
    /// Edge potentials in [`BASE_PAIRS`] order.
    pub edge: [f64; 6],
}

impl Base {
    /// Unnormalized joint weight: product of node and edge potentials.
    pub fn weight(&self) -> f64 {
        self.node.iter().product::<f64>() * self.edge.iter().product::<f64>()
    }
}

/// Draws bases from the scene points with positive node potential.
///
/// Point `b1` is drawn ∝ φ_node; each later point ∝ φ_node times the edge
/// potentials to the points already drawn, restricted to candidates whose
/// distance to every drawn point lies in the spread window.
pub struct BaseSampler<'a> {
    scene: &'a GuidedScene,
    model: &'a ObjectModel,
    cfg: &'a StocsConfig,
    support: Vec<usize>,
    support_weight: f64,
    min_d2: f64,
    max_d2: f64,
}

impl<'a> BaseSampler<'a> {
    pub fn new(scene: &'a GuidedScene, model: &'a ObjectModel, cfg: &'a StocsConfig) -> Result<Self> {
        let support: Vec<usize> = (0..scene.len()).filter(|&i| scene.probs[i] > 0.0).collect();
        if support.len() < 4 {
            return Err(Error::InsufficientSupport);
        }
        let support_weight = support.iter().map(|&i| scene.probs[i]).sum();
        let min_d = cfg.min_spread * model.diameter;
        let max_d = cfg.max_spread * model.diameter;
        Ok(Self {
            scene,
            model,
            cfg,
            support,
            support_weight,
            min_d2: min_d * min_d,
            max_d2: max_d * max_d,
        })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// One base according to the configured [`SamplingMode`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Base> {
        match self.cfg.sampling {
            SamplingMode::Sequential => {
                for _ in 0..self.cfg.max_base_attempts.max(1) {
                    if let Some((base, _)) = self.propose(rng) {
                        return Ok(base);
                    }
                }
                Err(Error::InsufficientSupport)
            }
            SamplingMode::Exact { max_attempts } => {
                let bound = self.support_weight;
                for _ in 0..max_attempts.max(1) {
                    if let Some((base, normalizers)) = self.propose(rng) {
                        let accept = normalizers[1..]
                            .iter()
                            .map(|w| w / bound)
                            .product::<f64>();
                        if rng.random::<f64>() < accept {
                            return Ok(base);
                        }
                    }
                }
                Err(Error::InsufficientSupport)
            }
        }
    }

    /// Sequential draw; `None` on a dead end. Also returns the four
    /// conditional normalizers.
    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(Base, [f64; 4])> {
        let scene = self.scene;
        let pts = &scene.cloud.points;
        let nrm = &scene.cloud.normals;
        let mut chosen = [usize::MAX; 4];
        let mut normalizers = [0.0; 4];
        // candidate, running weight, edge potentials to the points drawn so far
        let mut pool: Vec<(usize, f64, [f64; 3])> =
            self.support.iter().map(|&c| (c, scene.probs[c], [1.0; 3])).collect();
        let mut edge = [1.0; 6];

        for step in 0..4 {
            if step > 0 {
                let b = chosen[step - 1];
                pool.retain_mut(|(c, w, edges)| {
                    if *c == b {
                        return false;
                    }
                    let d2 = (pts[*c] - pts[b]).norm_squared();
                    if d2 < self.min_d2 || d2 > self.max_d2 {
                        return false;
                    }
                    let e = edge_potential_with(self.model, &self.cfg.edge, &pts[b], &nrm[b], &pts[*c], &nrm[*c]);
                    edges[step - 1] = e;
                    *w *= e;
                    *w > 0.0
                });
            }
            let total: f64 = pool.iter().map(|e| e.1).sum();
            if !(total > 0.0) {
                return None;
            }
            normalizers[step] = total;
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = pool.len() - 1;
            for (k, entry) in pool.iter().enumerate() {
                acc += entry.1;
                if target < acc {
                    pick = k;
                    break;
                }
            }
            let (c, _, edges) = pool[pick];
            chosen[step] = c;
            for (j, &e) in edges.iter().enumerate().take(step) {
                let slot = BASE_PAIRS.iter().position(|&p| p == (j, step)).unwrap_or(0);
                edge[slot] = e;
            }
        }
        let node = chosen.map(|c| scene.probs[c]);
        Some((
            Base {
                indices: chosen,
                node,
                edge,
            },
            normalizers,
        ))
    }
}

/// Draws one base from `sampler`.
pub fn sample_base<R: Rng + ?Sized>(sampler: &BaseSampler<'_>, rng: &mut R) -> Result<Base> {
    sampler.sample(rng)
}
