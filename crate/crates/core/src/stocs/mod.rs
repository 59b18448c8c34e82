//! Heatmap-guided Stochastic Congruent Sets.
//!
//! Each trial draws a four-point base from the scene with probability
//! proportional to the product of node potentials (heatmap probabilities)
//! and model edge potentials, finds congruent quadruples on the model,
//! aligns each one, and scores the alignment by the probability mass of the
//! scene points it explains. The best score over all trials wins.
//!
//! Trials use independent ChaCha streams keyed by trial index, so any
//! partition of trials across threads reproduces the serial result as long
//! as the partial results are merged with [`merge_outcomes`].

mod config;
mod congruent;
mod sampler;
mod score;

pub use config::{SamplingMode, StocsConfig};
pub use congruent::{find_congruent_sets, CongruentIndex, Quadruple};
pub use sampler::{sample_base, Base, BaseSampler, BASE_PAIRS};
pub use score::score_hypothesis;

/// Pixel stride used when back-projecting scenes.
pub const DEFAULT_STRIDE: u32 = 4;
/// Neighbors used for scene normal estimation.
pub const DEFAULT_NORMAL_K: usize = 10;

use alloc::vec::Vec;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{
    best_rigid_alignment, estimate_normals, Point3, PointCloud, RigidTransform, SpatialIndex, UnitVector3,
};
use crate::ingest::{annotate_cloud, backproject, CameraIntrinsics, DepthImage, ProbabilityHeatmap};
use crate::model::ObjectModel;

/// Scene cloud (with normals) plus per-point class probabilities.
#[derive(Debug, Clone)]
pub struct GuidedScene {
    pub cloud: PointCloud,
    pub probs: Vec<f64>,
    pub index: SpatialIndex,
}

impl GuidedScene {
    pub fn new(cloud: PointCloud, probs: Vec<f64>) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if !cloud.has_normals() {
            return Err(Error::InvalidParameter("scene cloud needs normals"));
        }
        if probs.len() != cloud.len() {
            return Err(Error::LengthMismatch {
                expected: cloud.len(),
                got: probs.len(),
            });
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter("probabilities must be finite and >= 0"));
        }
        let index = SpatialIndex::build(&cloud)?;
        Ok(Self { cloud, probs, index })
    }

    /// Back-projects `depth` on a `stride` grid, estimates normals facing the
    /// camera from `normal_k` neighbors and attaches heatmap probabilities.
    pub fn from_depth(
        depth: &DepthImage,
        k: &CameraIntrinsics,
        heatmap: &ProbabilityHeatmap,
        class_id: &str,
        stride: u32,
        normal_k: usize,
    ) -> Result<Self> {
        heatmap.class(class_id)?;
        let cloud = backproject(depth, k, stride)?;
        let cloud = estimate_normals(&cloud, normal_k, &Point3::origin())?;
        let probs = annotate_cloud(&cloud, heatmap, class_id)?;
        Self::new(cloud, probs)
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn with_probs(&self, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: probs.len(),
            });
        }
        Ok(Self {
            cloud: self.cloud.clone(),
            probs,
            index: self.index.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseHypothesis {
    /// Maps model coordinates into the scene.
    pub transform: RigidTransform,
    pub score: f64,
    pub trial: usize,
    pub base: Base,
    pub correspondence: Quadruple,
}

/// What a single trial produced.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    /// The sampler ran out of candidates.
    NoBase,
    /// A base was drawn but no model quadruple matched it.
    NoCongruentSet,
    /// Congruent sets existed; `None` if every one scored below the bound.
    Scored(Option<PoseHypothesis>),
}

/// Aggregate of a run of trials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchSummary {
    pub best: Option<PoseHypothesis>,
    pub no_base: usize,
    pub no_congruent: usize,
    pub scored: usize,
}

impl SearchSummary {
    pub fn absorb(&mut self, outcome: TrialOutcome) {
        match outcome {
            TrialOutcome::NoBase => self.no_base += 1,
            TrialOutcome::NoCongruentSet => self.no_congruent += 1,
            TrialOutcome::Scored(h) => {
                self.scored += 1;
                if let Some(h) = h {
                    self.offer(h);
                }
            }
        }
    }

    /// Keeps the higher score; equal scores keep the lower trial index.
    pub fn offer(&mut self, h: PoseHypothesis) {
        let better = match &self.best {
            None => true,
            Some(b) => h.score > b.score || (h.score == b.score && h.trial < b.trial),
        };
        if better {
            self.best = Some(h);
        }
    }

    pub fn best_score(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.score)
    }

    /// Final result, mapping empty searches to their error.
    pub fn into_result(self) -> Result<PoseHypothesis> {
        match self.best {
            Some(h) => Ok(h),
            None if self.scored == 0 && self.no_congruent == 0 => Err(Error::InsufficientSupport),
            None => Err(Error::NoHypothesisFound),
        }
    }
}

/// Combines per-partition summaries; the result does not depend on how
/// trials were partitioned.
pub fn merge_outcomes(parts: impl IntoIterator<Item = SearchSummary>) -> SearchSummary {
    let mut total = SearchSummary::default();
    for p in parts {
        total.no_base += p.no_base;
        total.no_congruent += p.no_congruent;
        total.scored += p.scored;
        if let Some(h) = p.best {
            total.offer(h);
        }
    }
    total
}

/// Prepared search over one scene and one model.
pub struct Estimator<'a> {
    scene: &'a GuidedScene,
    model: &'a ObjectModel,
    cfg: &'a StocsConfig,
    congruent: &'a CongruentIndex,
    sampler: BaseSampler<'a>,
    grid: score::ScoreGrid,
    max_prob: f64,
}

impl<'a> Estimator<'a> {
    pub fn new(
        scene: &'a GuidedScene,
        model: &'a ObjectModel,
        congruent: &'a CongruentIndex,
        cfg: &'a StocsConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if model.is_empty() || !model.cloud.has_normals() {
            return Err(Error::EmptyCloud);
        }
        let sampler = BaseSampler::new(scene, model, cfg)?;
        let max_prob = scene.probs.iter().copied().fold(0.0, f64::max);
        let grid = score::ScoreGrid::new(&scene.cloud.points, &scene.probs, cfg.delta_s);
        Ok(Self {
            scene,
            model,
            cfg,
            congruent,
            sampler,
            grid,
            max_prob,
        })
    }

    /// RNG stream for `trial`.
    pub fn trial_rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(trial as u64);
        rng
    }

    /// Runs one trial; hypotheses scoring strictly below `bound` are dropped.
    pub fn run_trial(&self, trial: usize, bound: f64) -> TrialOutcome {
        let mut rng = self.trial_rng(trial);
        let Ok(base) = self.sampler.sample(&mut rng) else {
            return TrialOutcome::NoBase;
        };
        let pts = &self.scene.cloud.points;
        let nrm = &self.scene.cloud.normals;
        let bp: [Point3; 4] = base.indices.map(|i| pts[i]);
        let bn: [UnitVector3; 4] = base.indices.map(|i| nrm[i]);
        let mut sets = self.congruent.find(
            &bp,
            &bn,
            self.cfg.distance_tolerance,
            self.cfg.angle_tolerance,
            usize::MAX,
        );
        if sets.is_empty() {
            return TrialOutcome::NoCongruentSet;
        }
        if sets.len() > self.cfg.max_congruent_sets {
            let mut keep = index::sample(&mut rng, sets.len(), self.cfg.max_congruent_sets).into_vec();
            keep.sort_unstable();
            sets = keep.into_iter().map(|k| sets[k]).collect();
        }

        let mut best: Option<PoseHypothesis> = None;
        let mut local_bound = bound;
        for quad in sets {
            let src = quad.map(|m| self.model.cloud.points[m as usize]);
            let Ok(t) = best_rigid_alignment(&src, &bp) else {
                continue;
            };
            let Some(score) = score::score_bounded(
                &t,
                self.model,
                &self.grid,
                &self.scene.cloud.points,
                &self.scene.probs,
                self.max_prob,
                local_bound,
            ) else {
                continue;
            };
            if best.as_ref().is_none_or(|b| score > b.score) {
                local_bound = local_bound.max(score);
                best = Some(PoseHypothesis {
                    transform: t,
                    score,
                    trial,
                    base: base.clone(),
                    correspondence: quad,
                });
            }
        }
        TrialOutcome::Scored(best)
    }

    /// Runs trials `range` serially, pruning against the running best.
    pub fn run_trials(&self, range: core::ops::Range<usize>) -> SearchSummary {
        let mut summary = SearchSummary::default();
        for trial in range {
            let outcome = self.run_trial(trial, summary.best_score());
            summary.absorb(outcome);
        }
        summary
    }

    pub fn run(&self) -> Result<PoseHypothesis> {
        self.run_trials(0..self.cfg.trials).into_result()
    }
}

/// Full serial search: builds the congruent index, runs `cfg.trials` trials.
pub fn estimate_pose(scene: &GuidedScene, model: &ObjectModel, cfg: &StocsConfig) -> Result<PoseHypothesis> {
    let congruent = CongruentIndex::build(model);
    Estimator::new(scene, model, &congruent, cfg)?.run()
}
