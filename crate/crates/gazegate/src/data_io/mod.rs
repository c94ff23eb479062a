//! On-disk dataset format: per-recording CSV files plus a JSON manifest
//! tying subjects, stimuli, and recordings together.
//!
//! The CSV format is bit-exact by construction — floats are written in
//! Rust's shortest round-trip decimal form — so regenerating an identical
//! series always produces byte-identical files, and golden files diff
//! cleanly. Importers for proprietary eye-tracker formats are out of
//! scope; they would be thin converters into this format.

mod dataset;
mod recording;

pub use dataset::{
    load_dataset, save_dataset, Dataset, DatasetManifest, RecordingRef, StimulusInfo,
    MANIFEST_FORMAT_VERSION,
};
pub use recording::{read_recording, write_recording, FALLBACK_RATE_HZ, RECORDING_HEADER};

use std::path::PathBuf;

use thiserror::Error;

/// Errors from reading or writing recordings and datasets.
#[derive(Debug, Error)]
pub enum DataIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("{path}:{line}: {reason}")]
    Domain { path: PathBuf, line: usize, reason: String },
    #[error("{path}:{line}: timestamp does not increase over the previous row")]
    NonMonotoneTimestamps { path: PathBuf, line: usize },
    #[error("dataset integrity: {reason}")]
    Dataset { reason: String },
    #[error(transparent)]
    Series(#[from] crate::gaze::GazeError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

/// One rule broken by a manifest or by the files it references.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifestViolation {
    #[error("unsupported format_version {found} (this reader understands {MANIFEST_FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("rate_hz {rate} must be finite and positive")]
    InvalidRate { rate: f64 },
    #[error("subject '{subject}' declared more than once")]
    DuplicateSubject { subject: String },
    #[error("stimulus '{stimulus}' declared more than once")]
    DuplicateStimulus { stimulus: String },
    #[error("stimulus '{stimulus}': duration_s {duration} must be finite and positive")]
    InvalidDuration { stimulus: String, duration: f64 },
    #[error("stimulus '{stimulus}': {reason}")]
    InvalidAoi { stimulus: String, reason: String },
    #[error("recording '{path}': subject '{subject}' is not declared")]
    UnknownSubject { path: String, subject: String },
    #[error("recording '{path}': stimulus '{stimulus}' is not declared")]
    UnknownStimulus { path: String, stimulus: String },
    #[error("recording path '{path}' listed more than once")]
    DuplicatePath { path: String },
    #[error("subject '{subject}' has more than one recording for stimulus '{stimulus}'")]
    DuplicateRecording { subject: String, stimulus: String },
    #[error("recording '{path}': {reason}")]
    UnreadableRecording { path: String, reason: String },
}

/// Every violation found in one validation pass, reported together so a
/// broken manifest can be fixed in one round.
#[derive(Debug)]
pub struct ManifestError {
    pub violations: Vec<ManifestViolation>,
}

impl std::fmt::Display for ManifestError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "manifest has {} violation{}:",
            self.violations.len(),
            if self.violations.len() == 1 { "" } else { "s" }
        )?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ManifestError {}
