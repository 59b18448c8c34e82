//! Classifier-side math of the weakly supervised detector: WILDCAT class
//! and spatial pooling, score rescaling, the multi-label loss, the
//! multi-adversarial domain loss and the combined objective. Inputs are
//! plain arrays; nothing here trains.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Floor applied inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;
/// Default number of modalities per class.
pub const DEFAULT_MODALITIES: usize = 8;

/// `classes[c][m]` is modality `m` of class `c`, row-major `width × height`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimapStack {
    pub width: usize,
    pub height: usize,
    pub classes: Vec<Vec<Vec<f64>>>,
}

impl MultimapStack {
    pub fn new(width: usize, height: usize, classes: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let m = classes.first().map_or(0, |c| c.len());
        if m == 0 {
            return Err(Error::InvalidParameter("need at least one modality"));
        }
        for maps in &classes {
            if maps.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: maps.len(),
                });
            }
            if let Some(bad) = maps.iter().find(|g| g.len() != width * height) {
                return Err(Error::DimensionMismatch {
                    expected: width * height,
                    got: bad.len(),
                });
            }
        }
        Ok(Self { width, height, classes })
    }

    pub fn modalities(&self) -> usize {
        self.classes.first().map_or(0, |c| c.len())
    }
}

/// One grid per class, row-major `width × height`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMapStack {
    pub width: usize,
    pub height: usize,
    pub maps: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WildcatPoolingConfig {
    pub k_max: usize,
    pub k_min: usize,
    pub alpha: f64,
}

impl Default for WildcatPoolingConfig {
    fn default() -> Self {
        Self {
            k_max: 1,
            k_min: 1,
            alpha: 1.0,
        }
    }
}

/// Cell-wise mean over each class's modalities.
pub fn class_pool(m: &MultimapStack) -> ClassMapStack {
    let maps = m
        .classes
        .iter()
        .map(|mods| {
            let count = mods.len() as f64;
            (0..m.width * m.height)
                .map(|i| mods.iter().map(|g| g[i]).sum::<f64>() / count)
                .collect()
        })
        .collect();
    ClassMapStack {
        width: m.width,
        height: m.height,
        maps,
    }
}

/// Mean of the `k_max` largest cells plus `alpha` times the mean of the
/// `k_min` smallest cells.
pub fn spatial_pool_grid(grid: &[f64], cfg: &WildcatPoolingConfig) -> Result<f64> {
    let cells = grid.len();
    for k in [cfg.k_max, cfg.k_min] {
        if k == 0 || k > cells {
            return Err(Error::KTooLarge { k, cells });
        }
    }
    let mut sorted = grid.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let top: f64 = sorted[cells - cfg.k_max..].iter().sum::<f64>() / cfg.k_max as f64;
    let bottom: f64 = sorted[..cfg.k_min].iter().sum::<f64>() / cfg.k_min as f64;
    Ok(top + cfg.alpha * bottom)
}

/// Per-class score of every map in the stack.
pub fn spatial_pool(c: &ClassMapStack, cfg: &WildcatPoolingConfig) -> Result<Vec<f64>> {
    c.maps.iter().map(|g| spatial_pool_grid(g, cfg)).collect()
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Maps scores into (0, 1) with the logistic function.
pub fn rescale_scores(scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|&s| logistic(s)).collect()
}

#[inline]
fn clamped_ln(x: f64) -> f64 {
    libm::log(x.max(LOG_FLOOR))
}

/// Binary cross-entropy of probability `p` against target `y`.
#[inline]
pub fn binary_cross_entropy(p: f64, y: f64) -> f64 {
    -(y * clamped_ln(p) + (1.0 - y) * clamped_ln(1.0 - p))
}

/// Mean one-versus-all cross-entropy of logistic scores against 0/1 labels.
pub fn classification_loss(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| binary_cross_entropy(logistic(s), y))
        .sum();
    Ok(total / scores.len() as f64)
}

/// Domain of a training sample; the discriminator target is 1 for
/// synthetic (source) and 0 for real (target).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Synthetic,
    Real,
}

impl Domain {
    pub fn target(self) -> f64 {
        match self {
            Domain::Synthetic => 1.0,
            Domain::Real => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainBatch {
    /// Feature vector per sample.
    pub features: Vec<Vec<f64>>,
    /// Class probabilities per sample, `K` each.
    pub probs: Vec<Vec<f64>>,
    pub domains: Vec<Domain>,
}

impl DomainBatch {
    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn source_count(&self) -> usize {
        self.domains.iter().filter(|d| **d == Domain::Synthetic).count()
    }

    pub fn target_count(&self) -> usize {
        self.len() - self.source_count()
    }
}

/// Logistic probe `σ(w·x + b)` standing in for a domain discriminator.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDiscriminator {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearDiscriminator {
    pub fn probability(&self, x: &[f64]) -> f64 {
        let z: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum();
        logistic(z + self.bias)
    }
}

/// Sum over classes `k` and samples `i` of the cross-entropy between
/// discriminator `k` applied to `ŷ_i^k · f_i` and the domain target,
/// divided by the batch size.
pub fn mada_domain_loss(batch: &DomainBatch, discs: &[LinearDiscriminator]) -> Result<f64> {
    let n = batch.len();
    if batch.features.len() != n || batch.probs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: batch.features.len().min(batch.probs.len()),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("empty batch"));
    }
    let dim = batch.features[0].len();
    for (f, p) in batch.features.iter().zip(&batch.probs) {
        if f.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.len(),
            });
        }
        if p.len() != discs.len() {
            return Err(Error::DimensionMismatch {
                expected: discs.len(),
                got: p.len(),
            });
        }
    }
    if let Some(d) = discs.iter().find(|d| d.weights.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: d.weights.len(),
        });
    }
    let mut total = 0.0;
    let mut scaled = alloc::vec![0.0; dim];
    for (k, disc) in discs.iter().enumerate() {
        for i in 0..n {
            let y = batch.probs[i][k];
            for (s, &f) in scaled.iter_mut().zip(&batch.features[i]) {
                *s = y * f;
            }
            total += binary_cross_entropy(disc.probability(&scaled), batch.domains[i].target());
        }
    }
    Ok(total / n as f64)
}

/// `l_y − λ l_d`.
pub fn global_objective(l_y: f64, l_d: f64, lambda: f64) -> f64 {
    l_y - lambda * l_d
}
