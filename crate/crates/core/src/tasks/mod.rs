//! The three experiments: diagnostic-group classification, next-week state
//! prediction and next-week score prediction.
//!
//! Each experiment trains two forests that differ only in the feature map:
//! MRSF (signature of the missing-aware path) and the naive per-instrument
//! mean over observed weeks. Both see the same windows, the same split and
//! the same forest seed.

mod classify;
mod labels;
mod predict;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use classify::{run_classification, ClassificationOutcome, ParticipantProbabilities, TestPrediction};
pub use labels::{
    severity_bucket, state_label, true_proportions, Severity, StateLabel, ASRM_ELEVATED_ABOVE,
    QIDS_ELEVATED_ABOVE, SEVERITY_NOTES,
};
pub use predict::{
    prediction_instances, rollout_bucket_count, rollout_states, run_rollout, run_score_prediction,
    run_state_prediction, severity_report, PredictionInstance, RolloutEntry, RolloutOutcome, ScoreCell, ScoreOutcome,
    SeverityReport, StateCell, StateOutcome,
};

use crate::encode::{mrsf, naive_features, Group, Instrument, WeeklyObservation};
use crate::error::{Error, Result};
use crate::eval::DEFAULT_BOOTSTRAP_RESAMPLES;
use crate::forest::ForestParams;
use crate::seed;

/// A participant left out of a task, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub participant_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classify,
    StatePredict,
    ScorePredict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub task: TaskKind,
    pub window_length: usize,
    pub signature_level: usize,
    pub split_fraction: f64,
    pub instruments: Vec<Instrument>,
    pub groups: Vec<Group>,
    pub seed: u64,
    pub forest: ForestParams,
    pub bootstrap_resamples: usize,
    /// Classification only: also produce leave-one-out probability vectors.
    pub leave_one_out: bool,
    /// State prediction only: weeks predicted per participant in the rollout; 0 disables it.
    pub rollout_horizon: usize,
}

impl TaskConfig {
    fn base(task: TaskKind, window_length: usize) -> Self {
        Self {
            task,
            window_length,
            signature_level: 2,
            split_fraction: 0.7,
            instruments: Instrument::ALL.to_vec(),
            groups: Group::ALL.to_vec(),
            seed: 0,
            forest: ForestParams::default(),
            bootstrap_resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
            leave_one_out: true,
            rollout_horizon: 5,
        }
    }

    pub fn classification() -> Self {
        Self::base(TaskKind::Classify, 20)
    }

    pub fn state_prediction() -> Self {
        Self::base(TaskKind::StatePredict, 10)
    }

    pub fn score_prediction() -> Self {
        Self::base(TaskKind::ScorePredict, 10)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::invalid(format!("split_fraction {} not in (0, 1)", self.split_fraction)));
        }
        if self.window_length < 2 {
            return Err(Error::invalid("window_length must be at least 2"));
        }
        if self.signature_level == 0 {
            return Err(Error::invalid("signature_level must be positive"));
        }
        if self.bootstrap_resamples == 0 {
            return Err(Error::invalid("bootstrap_resamples must be positive"));
        }
        if self.groups.is_empty() {
            return Err(Error::invalid("no groups selected"));
        }
        if self.task != TaskKind::Classify && self.instruments.is_empty() {
            return Err(Error::invalid("no instruments selected"));
        }
        Ok(())
    }

    fn seed_for(&self, tag: &str, index: u64) -> u64 {
        seed::derive(self.seed, tag, index)
    }
}

/// The two feature maps compared in every experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMap {
    Mrsf { level: usize },
    Naive,
}

impl FeatureMap {
    pub fn name(self) -> &'static str {
        match self {
            FeatureMap::Mrsf { .. } => "mrsf",
            FeatureMap::Naive => "naive",
        }
    }

    pub fn features(self, window: &[WeeklyObservation]) -> Result<Vec<f64>> {
        match self {
            FeatureMap::Mrsf { level } => mrsf(window, level),
            FeatureMap::Naive => Ok(naive_features(window).to_vec()),
        }
    }
}

/// Shuffles `items` with `rng` and keeps `round(fraction · n)` for training,
/// clamped so both sides are non-empty when `n >= 2`.
pub(crate) fn split_train_test<T: Copy>(items: &[T], fraction: f64, rng: &mut impl rand::Rng) -> (Vec<T>, Vec<T>) {
    let mut shuffled = items.to_vec();
    shuffled.shuffle(rng);
    let n = shuffled.len();
    let n_train = if n < 2 {
        n
    } else {
        ((fraction * n as f64).round() as usize).clamp(1, n - 1)
    };
    let test = shuffled.split_off(n_train);
    (shuffled, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let items: Vec<usize> = (0..10).collect();
        let (tr, te) = split_train_test(&items, 0.7, &mut seed::rng(0, "s", 0));
        assert_eq!((tr.len(), te.len()), (7, 3));
        let mut all: Vec<_> = tr.iter().chain(&te).copied().collect();
        all.sort();
        assert_eq!(all, items);

        let (tr, te) = split_train_test(&[1, 2], 0.99, &mut seed::rng(0, "s", 0));
        assert_eq!((tr.len(), te.len()), (1, 1));
    }

    #[test]
    fn config_validation() {
        let mut c = TaskConfig::classification();
        assert!(c.validate().is_ok());
        c.split_fraction = 1.0;
        assert!(c.validate().is_err());
        let mut c = TaskConfig::state_prediction();
        c.window_length = 1;
        assert!(c.validate().is_err());
    }
}
