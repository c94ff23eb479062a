//! Event feature vectors and z-score normalization.

use serde::{Deserialize, Serialize};

use super::BiometricError;
use crate::gaze::{EventLabel, GazeEvent};

/// Number of features per event, identical for both event classes.
pub const FEATURE_DIM: usize = 6;

/// The two event classes the biometric uses. Smooth pursuit is excluded:
/// it is rare, hard to detect reliably, and the attack works without it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventClass {
    Fixation,
    Saccade,
}

impl EventClass {
    pub fn matches(self, label: EventLabel) -> bool {
        matches!(
            (self, label),
            (EventClass::Fixation, EventLabel::Fixation)
                | (EventClass::Saccade, EventLabel::Saccade)
        )
    }
}

/// A fixed-length description of one event, tagged with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub class: EventClass,
    pub subject_id: String,
    pub stimulus_id: String,
}

/// Turns a segmented event into its feature vector.
///
/// Fixations: `[duration_ms, centroid_x, centroid_y, dispersion_deg,
/// mean_velocity, velocity_std]`. Saccades: `[duration_ms, amplitude_deg,
/// mean_velocity, peak_velocity, direction_deg, peak_to_mean_ratio]`.
///
/// Events with fewer than two samples carry no usable kinematics and are
/// rejected as degenerate.
pub fn extract_features(
    event: &GazeEvent,
    subject_id: &str,
    stimulus_id: &str,
) -> Result<FeatureVector, BiometricError> {
    if event.sample_range.len() < 2 {
        return Err(BiometricError::DegenerateEvent { got: event.sample_range.len() });
    }
    let (class, values) = match event.kind {
        EventLabel::Fixation => (
            EventClass::Fixation,
            vec![
                event.duration_ms,
                event.centroid_x,
                event.centroid_y,
                event.dispersion_deg,
                event.mean_velocity,
                event.velocity_std,
            ],
        ),
        EventLabel::Saccade => (
            EventClass::Saccade,
            vec![
                event.duration_ms,
                event.amplitude_deg,
                event.mean_velocity,
                event.peak_velocity,
                event.direction_deg(),
                if event.mean_velocity > 0.0 {
                    event.peak_velocity / event.mean_velocity
                } else {
                    0.0
                },
            ],
        ),
        kind => return Err(BiometricError::UnsupportedEventKind { kind }),
    };
    Ok(FeatureVector {
        values,
        class,
        subject_id: subject_id.to_string(),
        stimulus_id: stimulus_id.to_string(),
    })
}

/// Per-dimension z-score statistics fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub means: Vec<f64>,
    /// Population standard deviations; zero-variance dimensions store 1.0
    /// so normalization never divides by zero.
    pub stds: Vec<f64>,
}

impl NormStats {
    /// Identity statistics (mean 0, std 1) for hand-built networks.
    pub fn identity(dim: usize) -> Self {
        NormStats { means: vec![0.0; dim], stds: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }
}

/// Fits z-score statistics on `features` and returns the normalized copies
/// together with the statistics. Uses the population standard deviation;
/// zero-variance dimensions normalize with std 1.
pub fn normalize(features: &[FeatureVector]) -> Result<(Vec<FeatureVector>, NormStats), BiometricError> {
    if features.is_empty() {
        return Err(BiometricError::NoFeatures);
    }
    let dim = features[0].values.len();
    for f in features {
        if f.values.len() != dim {
            return Err(BiometricError::DimensionMismatch { expected: dim, got: f.values.len() });
        }
    }
    let n = features.len() as f64;
    let mut means = vec![0.0; dim];
    for f in features {
        for (m, v) in means.iter_mut().zip(&f.values) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut stds = vec![0.0; dim];
    for f in features {
        for (s, (v, m)) in stds.iter_mut().zip(f.values.iter().zip(&means)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    let stats = NormStats { means, stds };
    let normalized = features.iter().map(|f| apply_norm(&stats, f)).collect();
    Ok((normalized, stats))
}

/// Applies fitted statistics to one feature vector.
pub fn apply_norm(stats: &NormStats, feature: &FeatureVector) -> FeatureVector {
    let values = feature
        .values
        .iter()
        .zip(stats.means.iter().zip(&stats.stds))
        .map(|(v, (m, s))| (v - m) / s)
        .collect();
    FeatureVector { values, ..feature.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::{detect_events_ivt, segment_events, GazeSample, GazeSeries, IvtParams};

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            values,
            class: EventClass::Fixation,
            subject_id: "s".into(),
            stimulus_id: "i".into(),
        }
    }

    #[test]
    fn zscore_of_two_values_is_plus_minus_one() {
        let (normed, stats) = normalize(&[fv(vec![1.0]), fv(vec![3.0])]).unwrap();
        assert_eq!(stats.means, vec![2.0]);
        assert_eq!(stats.stds, vec![1.0]); // population std of {1, 3}
        assert_eq!(normed[0].values, vec![-1.0]);
        assert_eq!(normed[1].values, vec![1.0]);
    }

    #[test]
    fn zero_variance_dimension_normalizes_with_std_one() {
        let (normed, stats) = normalize(&[fv(vec![5.0]), fv(vec![5.0])]).unwrap();
        assert_eq!(stats.stds, vec![1.0]);
        assert_eq!(normed[0].values, vec![0.0]);
    }

    #[test]
    fn normalize_rejects_empty_and_ragged_input() {
        assert!(matches!(normalize(&[]), Err(BiometricError::NoFeatures)));
        assert!(matches!(
            normalize(&[fv(vec![1.0]), fv(vec![1.0, 2.0])]),
            Err(BiometricError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn normalized_training_set_has_zero_mean_unit_std() {
        let feats: Vec<FeatureVector> =
            (0..50).map(|i| fv(vec![i as f64, 3.0 * i as f64 + 7.0])).collect();
        let (normed, _) = normalize(&feats).unwrap();
        for d in 0..2 {
            let mean: f64 = normed.iter().map(|f| f.values[d]).sum::<f64>() / 50.0;
            let var: f64 = normed.iter().map(|f| f.values[d].powi(2)).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    /// Step series from the detector tests: fixation, saccade, fixation.
    fn step_events() -> Vec<crate::gaze::GazeEvent> {
        let dt = 1000.0 / 120.0;
        let mut samples = Vec::new();
        let mut t = 0.0;
        for _ in 0..30 {
            samples.push(GazeSample::new(50.0, 90.0, t, EventLabel::Unlabeled));
            t += dt;
        }
        for x in [54.0, 58.0, 60.0] {
            samples.push(GazeSample::new(x, 90.0, t, EventLabel::Unlabeled));
            t += dt;
        }
        for _ in 0..30 {
            samples.push(GazeSample::new(60.0, 90.0, t, EventLabel::Unlabeled));
            t += dt;
        }
        let series = GazeSeries::new(samples, 120.0, "s", "i").unwrap();
        let labeled = detect_events_ivt(&series, &IvtParams::default()).unwrap();
        segment_events(&labeled).unwrap()
    }

    #[test]
    fn feature_vectors_have_six_dimensions_and_match_event_stats() {
        for e in step_events() {
            let f = extract_features(&e, "s7", "im2").unwrap();
            assert_eq!(f.values.len(), FEATURE_DIM);
            assert_eq!(f.subject_id, "s7");
            assert_eq!(f.values[0], e.duration_ms);
            match f.class {
                EventClass::Fixation => {
                    assert_eq!(f.values[1], e.centroid_x);
                    assert_eq!(f.values[2], e.centroid_y);
                }
                EventClass::Saccade => {
                    assert_eq!(f.values[1], e.amplitude_deg);
                    assert_eq!(f.values[3], e.peak_velocity);
                    assert!(f.values[5] >= 1.0, "peak/mean ratio");
                }
            }
        }
    }

    #[test]
    fn degenerate_events_are_rejected() {
        let samples = vec![
            GazeSample::new(10.0, 90.0, 0.0, EventLabel::Fixation),
            GazeSample::new(20.0, 90.0, 10.0, EventLabel::Saccade),
            GazeSample::new(20.0, 90.0, 20.0, EventLabel::Fixation),
        ];
        let series = GazeSeries::new(samples, 100.0, "s", "i").unwrap();
        let events = segment_events(&series).unwrap();
        let single = events.iter().find(|e| e.sample_range.len() == 1).unwrap();
        assert!(matches!(
            extract_features(single, "s", "i"),
            Err(BiometricError::DegenerateEvent { got: 1 })
        ));
    }

    #[test]
    fn pursuit_events_have_no_features() {
        let samples = vec![
            GazeSample::new(10.0, 90.0, 0.0, EventLabel::SmoothPursuit),
            GazeSample::new(11.0, 90.0, 10.0, EventLabel::SmoothPursuit),
        ];
        let series = GazeSeries::new(samples, 100.0, "s", "i").unwrap();
        let events = segment_events(&series).unwrap();
        assert!(matches!(
            extract_features(&events[0], "s", "i"),
            Err(BiometricError::UnsupportedEventKind { .. })
        ));
    }
}
