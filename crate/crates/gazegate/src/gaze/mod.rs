//! Core gaze-data types: samples, series, events, geometry, and the
//! velocity-threshold event detector.
//!
//! Coordinates live on the unit sphere in equirectangular degrees:
//! `x` is azimuth in `[0, 360)`, `y` is polar angle in `[0, 180)` with
//! `y = 0` at the north pole. Timestamps are milliseconds from recording
//! start and must increase strictly within a series.

mod events;
mod geometry;

pub use events::{detect_events_ivt, sample_velocity, segment_events, GazeEvent, IvtParams};
pub use geometry::{
    angular_distance, clamp_polar, unit_vector, wrap_azimuth, wrap_signed_delta, MAX_POLAR,
};

use thiserror::Error;

/// Errors from series construction, geometry, and event detection.
#[derive(Debug, Error)]
pub enum GazeError {
    #[error("sample {index}: {reason}")]
    InvalidSample { index: usize, reason: String },
    #[error("timestamps must increase strictly (violated at sample {index})")]
    NonMonotoneTimestamps { index: usize },
    #[error("zero time gap between sample {index} and its predecessor")]
    ZeroTimeGap { index: usize },
    #[error("series too short: need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("series contains unlabeled samples (first at index {index})")]
    UnlabeledSamples { index: usize },
    #[error("sampling rate must be positive and finite, got {rate}")]
    InvalidRate { rate: f64 },
    #[error("invalid event-detection parameters: {reason}")]
    InvalidParams { reason: String },
}

/// Oculomotor event class attached to each sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventLabel {
    Fixation,
    Saccade,
    SmoothPursuit,
    Unlabeled,
}

impl EventLabel {
    /// Single-token code used by the recording CSV format.
    pub fn code(self) -> &'static str {
        match self {
            EventLabel::Fixation => "F",
            EventLabel::Saccade => "S",
            EventLabel::SmoothPursuit => "SP",
            EventLabel::Unlabeled => "U",
        }
    }

    /// Parses a CSV label code.
    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "F" => Some(EventLabel::Fixation),
            "S" => Some(EventLabel::Saccade),
            "SP" => Some(EventLabel::SmoothPursuit),
            "U" => Some(EventLabel::Unlabeled),
            _ => None,
        }
    }
}

/// A point on the gaze sphere, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazePoint {
    /// Azimuth in `[0, 360)`.
    pub x: f64,
    /// Polar angle in `[0, 180)`, `0` at the north pole.
    pub y: f64,
}

impl GazePoint {
    pub fn new(x: f64, y: f64) -> Self {
        GazePoint { x, y }
    }
}

/// One gaze measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    /// Azimuth in `[0, 360)` degrees.
    pub x: f64,
    /// Polar angle in `[0, 180)` degrees.
    pub y: f64,
    /// Milliseconds since recording start, `>= 0`.
    pub t_ms: f64,
    pub label: EventLabel,
}

impl GazeSample {
    pub fn new(x: f64, y: f64, t_ms: f64, label: EventLabel) -> Self {
        GazeSample { x, y, t_ms, label }
    }

    pub fn point(&self) -> GazePoint {
        GazePoint { x: self.x, y: self.y }
    }

    /// Human-readable reason this sample breaks the coordinate/time
    /// domain, or `None` when it is valid.
    pub fn domain_error(&self) -> Option<String> {
        if !self.x.is_finite() || !(0.0..360.0).contains(&self.x) {
            return Some(format!("x = {} outside [0, 360)", self.x));
        }
        if !self.y.is_finite() || !(0.0..180.0).contains(&self.y) {
            return Some(format!("y = {} outside [0, 180)", self.y));
        }
        if !self.t_ms.is_finite() || self.t_ms < 0.0 {
            return Some(format!("t_ms = {} is negative or non-finite", self.t_ms));
        }
        None
    }
}

/// A gaze recording: samples plus acquisition metadata.
///
/// Construction validates the sample domain and strict timestamp order.
/// Irregular sampling (gaps wider than 3x the nominal period) is legal and
/// only *flagged*, via [`GazeSeries::gap_flags`].
#[derive(Debug, Clone, PartialEq)]
pub struct GazeSeries {
    samples: Vec<GazeSample>,
    sampling_rate_hz: f64,
    subject_id: String,
    stimulus_id: String,
}

impl GazeSeries {
    pub fn new(
        samples: Vec<GazeSample>,
        sampling_rate_hz: f64,
        subject_id: impl Into<String>,
        stimulus_id: impl Into<String>,
    ) -> Result<Self, GazeError> {
        if !sampling_rate_hz.is_finite() || sampling_rate_hz <= 0.0 {
            return Err(GazeError::InvalidRate { rate: sampling_rate_hz });
        }
        for (i, s) in samples.iter().enumerate() {
            if let Some(reason) = s.domain_error() {
                return Err(GazeError::InvalidSample { index: i, reason });
            }
            if i > 0 && s.t_ms <= samples[i - 1].t_ms {
                return Err(GazeError::NonMonotoneTimestamps { index: i });
            }
        }
        Ok(GazeSeries {
            samples,
            sampling_rate_hz,
            subject_id: subject_id.into(),
            stimulus_id: stimulus_id.into(),
        })
    }

    /// New series with the same metadata but different samples.
    pub fn with_samples(&self, samples: Vec<GazeSample>) -> Result<Self, GazeError> {
        GazeSeries::new(
            samples,
            self.sampling_rate_hz,
            self.subject_id.clone(),
            self.stimulus_id.clone(),
        )
    }

    /// New series with the same samples/ids but a different nominal rate.
    pub fn with_rate(&self, sampling_rate_hz: f64) -> Result<Self, GazeError> {
        GazeSeries::new(
            self.samples.clone(),
            sampling_rate_hz,
            self.subject_id.clone(),
            self.stimulus_id.clone(),
        )
    }

    pub fn samples(&self) -> &[GazeSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<GazeSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn stimulus_id(&self) -> &str {
        &self.stimulus_id
    }

    /// Nominal sample period in milliseconds.
    pub fn nominal_period_ms(&self) -> f64 {
        1000.0 / self.sampling_rate_hz
    }

    /// Indices `i` where the gap `t[i] - t[i-1]` exceeds 3x the nominal
    /// period. Such gaps are legal (tracker dropouts) but worth surfacing.
    pub fn gap_flags(&self) -> Vec<usize> {
        let limit = 3.0 * self.nominal_period_ms();
        self.samples
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].t_ms - w[0].t_ms > limit)
            .map(|(i, _)| i + 1)
            .collect()
    }
}
