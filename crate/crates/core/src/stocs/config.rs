use crate::error::{Error, Result};
use crate::model::{EdgeParams, ObjectModel};

/// How the four base points are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// Sequential conditional draws with unnormalized weights.
    #[default]
    Sequential,
    /// Sequential proposal followed by an accept/reject correction, so that
    /// accepted bases follow the product distribution exactly. Gives up after
    /// `max_attempts` proposals.
    Exact { max_attempts: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StocsConfig {
    pub trials: usize,
    /// Inlier distance for the alignment score, meters.
    pub delta_s: f64,
    /// Smallest allowed base pair distance, as a fraction of the model diameter.
    pub min_spread: f64,
    /// Largest allowed base pair distance, as a fraction of the model diameter.
    pub max_spread: f64,
    /// Allowed pair-distance mismatch between base and model quadruple, meters.
    pub distance_tolerance: f64,
    /// Allowed point-pair-feature angle mismatch, radians.
    pub angle_tolerance: f64,
    pub max_congruent_sets: usize,
    pub seed: u64,
    pub edge: EdgeParams,
    pub sampling: SamplingMode,
    /// Redraws allowed when a sequential draw runs out of candidates.
    pub max_base_attempts: usize,
}

impl StocsConfig {
    pub const DEFAULT_TRIALS: usize = 500;
    pub const MIN_DELTA_S: f64 = 0.005;

    /// Defaults derived from the model: `δ_s = max(5 mm, 1% diameter)`,
    /// distance tolerance `δ_s`, angle tolerance twice the feature angle step.
    pub fn for_model(model: &ObjectModel) -> Self {
        let delta_s = Self::MIN_DELTA_S.max(0.01 * model.diameter);
        Self {
            trials: Self::DEFAULT_TRIALS,
            delta_s,
            min_spread: 0.2,
            max_spread: 0.8,
            distance_tolerance: delta_s,
            angle_tolerance: 2.0 * model.ppf.steps.angle,
            max_congruent_sets: 16,
            seed: 0,
            edge: EdgeParams::default(),
            sampling: SamplingMode::Sequential,
            max_base_attempts: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1"));
        }
        if !(self.delta_s > 0.0) {
            return Err(Error::InvalidParameter("delta_s must be positive"));
        }
        if !(self.min_spread >= 0.0 && self.min_spread < self.max_spread) {
            return Err(Error::InvalidParameter("min spread must be below max spread"));
        }
        if !(self.distance_tolerance >= 0.0 && self.angle_tolerance >= 0.0) {
            return Err(Error::InvalidParameter("tolerances must be non-negative"));
        }
        if self.max_congruent_sets == 0 {
            return Err(Error::InvalidParameter("max congruent sets must be >= 1"));
        }
        if !(self.edge.epsilon >= 0.0 && self.edge.epsilon <= 1.0) {
            return Err(Error::InvalidParameter("edge floor must be in [0, 1]"));
        }
        Ok(())
    }
}
