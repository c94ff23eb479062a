//! Privacy and utility evaluation: identification-rate sweeps under the
//! stimulus-split protocol, and utility metrics (AOI dwell-time RMSE,
//! saliency-map KL divergence, gaze-prediction angular error) comparing a
//! transformed dataset against the original.

mod aoi;
mod identification;
mod report;
mod utility;

pub use aoi::Aoi;
pub use identification::{identification_rate, run_identification, split_stimuli};
pub use report::{render_reports_csv, render_reports_text, REPORT_CSV_HEADER};
pub use utility::{
    build_saliency_map, dwell_rmse, dwell_time, kl_divergence, predict_gaze_cv,
    prediction_error, utility_metrics, SaliencyMap, UtilityParams, DEFAULT_CELL_DEG,
    DEFAULT_KL_EPS, DEFAULT_PREDICTION_HORIZON_MS, DEFAULT_SMOOTHING_SIGMA_DEG,
};

use crate::biometric::DEFAULT_K;
use crate::privacy::MechanismConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from evaluation plumbing and metrics.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid AOI '{id}': {reason}")]
    InvalidAoi { id: String, reason: String },
    #[error("need at least 2 stimuli to split into train and test, got {got}")]
    TooFewStimuli { got: usize },
    #[error("invalid evaluation config: {reason}")]
    InvalidConfig { reason: String },
    #[error("empty input: {what}")]
    Empty { what: &'static str },
    #[error("dwell-time index sets differ: {reason}")]
    IndexMismatch { reason: String },
    #[error("saliency grids differ in shape: {p_rows}x{p_cols} (cell {p_cell}) vs {q_rows}x{q_cols} (cell {q_cell})")]
    ShapeMismatch {
        p_rows: usize,
        p_cols: usize,
        p_cell: f64,
        q_rows: usize,
        q_cols: usize,
        q_cell: f64,
    },
    #[error("cannot build a saliency map: no fixation mass in the input")]
    EmptyInput,
    #[error("invalid saliency grid: {reason}")]
    InvalidGrid { reason: String },
    #[error("series too short for prediction: {got} samples, need at least 3")]
    TooShort { got: usize },
    #[error("evaluation run {run} failed: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync + 'static>,
    },
}

/// Configuration for an identification-rate evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Fraction of stimuli assigned to training in each run (0 < f < 1).
    /// The train-set size is `round(fraction * stimulus_count)` clamped to
    /// `[1, count - 1]`.
    pub train_fraction: f64,
    /// Number of independent split-train-classify runs to aggregate.
    pub runs: usize,
    /// Master seed; each run derives its own sub-seed from (seed, run).
    pub seed: u64,
    /// Prototypes per subject and event class in the classifier.
    pub k_clusters: usize,
    /// Transformation applied to both train and test series before feature
    /// extraction. Its RNG seed is remixed per run so randomized mechanisms
    /// redraw their noise each run.
    pub mechanism: MechanismConfig,
    /// Re-detect events on the transformed series (default). When false,
    /// the labels carried through the transformation are trusted as-is.
    pub relabel_after_mechanism: bool,
    /// Score one comparison per subject over the pooled test set instead of
    /// one per (subject, test stimulus).
    pub whole_test_set_streams: bool,
    /// Execute runs through the thread pool. Serial execution produces an
    /// identical report; the flag exists so that equality can be checked.
    pub parallel: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            train_fraction: 0.75,
            runs: 10,
            seed: 0,
            k_clusters: DEFAULT_K,
            mechanism: MechanismConfig::identity(),
            relabel_after_mechanism: true,
            whole_test_set_streams: false,
            parallel: true,
        }
    }
}

impl EvalConfig {
    /// Checks the config against a dataset's stimulus count.
    pub fn validate(&self, stimulus_count: usize) -> Result<(), EvalError> {
        if stimulus_count < 2 {
            return Err(EvalError::TooFewStimuli { got: stimulus_count });
        }
        if !self.train_fraction.is_finite()
            || self.train_fraction <= 0.0
            || self.train_fraction >= 1.0
        {
            return Err(EvalError::InvalidConfig {
                reason: format!(
                    "train_fraction must lie strictly between 0 and 1, got {}",
                    self.train_fraction
                ),
            });
        }
        if self.train_fraction * (stimulus_count as f64) < 1.0 {
            return Err(EvalError::InvalidConfig {
                reason: format!(
                    "train_fraction {} of {} stimuli leaves no training stimulus",
                    self.train_fraction, stimulus_count
                ),
            });
        }
        if self.runs == 0 {
            return Err(EvalError::InvalidConfig { reason: "runs must be at least 1".into() });
        }
        if self.k_clusters == 0 {
            return Err(EvalError::InvalidConfig {
                reason: "k_clusters must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Per-run bookkeeping inside an [`EvalReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Run index, 0-based.
    pub run: usize,
    /// Identification rate: correct / comparisons.
    pub ir: f64,
    /// Number of (subject, test stream) comparisons scored, including
    /// empty streams.
    pub comparisons: usize,
    /// Comparisons whose transformed test stream yielded no usable event
    /// features; each counts as incorrect.
    pub empty_streams: usize,
    /// Subjects excluded from this run for missing recordings.
    pub dropped_subjects: usize,
    /// Prototypes per subject actually used by the fixation network
    /// (0 when the network was skipped because some subject had no
    /// fixation features).
    pub fixation_k: usize,
    /// Same for the saccade network.
    pub saccade_k: usize,
}

/// Utility metrics comparing a transformed dataset against the original.
/// Each metric is `None` when its inputs were absent (e.g. no AOIs
/// declared, or no usable fixations on either side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityMetrics {
    /// RMSE over per-(subject, stimulus, AOI) dwell times, in seconds.
    pub dwell_rmse_s: Option<f64>,
    /// Mean per-stimulus KL divergence (nats) from the original saliency
    /// map to the transformed one.
    pub kl_divergence: Option<f64>,
    /// Mean angular error (degrees) of short-horizon gaze prediction on
    /// the transformed recordings.
    pub prediction_error_deg: Option<f64>,
}

/// Aggregated result of an identification-rate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Canonical description of the mechanism under test.
    pub mechanism: String,
    /// Identification rate of each run, in run order.
    pub per_run_ir: Vec<f64>,
    /// Mean of `per_run_ir`.
    pub ir_mean: f64,
    /// Population standard deviation of `per_run_ir`.
    pub ir_std: f64,
    /// Chance rate 1/C for C declared subjects.
    pub chance_rate: f64,
    /// Declared subject count C.
    pub subject_count: usize,
    /// Training fraction used for the stimulus splits.
    pub train_fraction: f64,
    /// Requested prototypes per subject and class.
    pub k_clusters: usize,
    /// Per-run details (effective k, empty streams, dropped subjects).
    pub runs: Vec<RunSummary>,
    /// Utility comparison against the untransformed dataset, when computed.
    pub utility: Option<UtilityMetrics>,
}

impl EvalReport {
    /// Mean of a slice; 0 for empty input.
    pub(crate) fn mean(values: &[f64]) -> f64 {
        if values.is_empty() {
            return 0.0;
        }
        values.iter().sum::<f64>() / values.len() as f64
    }

    /// Population standard deviation of a slice; 0 for empty input.
    pub(crate) fn population_std(values: &[f64]) -> f64 {
        if values.is_empty() {
            return 0.0;
        }
        let mean = Self::mean(values);
        let var =
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
        var.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_for_a_typical_dataset() {
        EvalConfig::default().validate(50).unwrap();
    }

    #[test]
    fn config_rejections_name_the_problem() {
        let base = EvalConfig::default();

        let err = base.clone().validate(1).unwrap_err();
        assert!(matches!(err, EvalError::TooFewStimuli { got: 1 }));

        let err = EvalConfig { train_fraction: 0.0, ..base.clone() }.validate(10).unwrap_err();
        assert!(matches!(err, EvalError::InvalidConfig { .. }));
        let err = EvalConfig { train_fraction: 1.0, ..base.clone() }.validate(10).unwrap_err();
        assert!(matches!(err, EvalError::InvalidConfig { .. }));
        let err =
            EvalConfig { train_fraction: f64::NAN, ..base.clone() }.validate(10).unwrap_err();
        assert!(matches!(err, EvalError::InvalidConfig { .. }));

        // A fraction so small that no training stimulus would be selected.
        let err = EvalConfig { train_fraction: 0.05, ..base.clone() }.validate(10).unwrap_err();
        assert!(matches!(err, EvalError::InvalidConfig { .. }));

        let err = EvalConfig { runs: 0, ..base.clone() }.validate(10).unwrap_err();
        assert!(matches!(err, EvalError::InvalidConfig { .. }));
        let err = EvalConfig { k_clusters: 0, ..base }.validate(10).unwrap_err();
        assert!(matches!(err, EvalError::InvalidConfig { .. }));
    }

    #[test]
    fn mean_and_std_match_hand_values() {
        let vals = [0.2, 0.4, 0.6];
        assert!((EvalReport::mean(&vals) - 0.4).abs() < 1e-15);
        // Population variance of {0.2, 0.4, 0.6} is 0.02666...
        let expected = (2.0 / 75.0f64).sqrt();
        assert!((EvalReport::population_std(&vals) - expected).abs() < 1e-12);
        assert_eq!(EvalReport::mean(&[]), 0.0);
        assert_eq!(EvalReport::population_std(&[]), 0.0);
    }
}
