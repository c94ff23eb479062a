//! RBF-network re-identification: the attack model used to measure how much
//! identity survives a privacy mechanism.
//!
//! Pipeline: segmented fixation and saccade events become fixed-length
//! feature vectors ([`extract_features`]), z-scored against training
//! statistics ([`normalize`]); per-subject k-means prototypes become RBF
//! hidden nodes ([`build_network`]); output weights solve the linear system
//! activations x weights = one-hot labels in the least-squares sense via a
//! Moore-Penrose pseudoinverse ([`train_weights`]). Two networks — one over
//! fixations, one over saccades — classify a stream of events from an
//! unknown subject by summing per-event score vectors and averaging the two
//! network sums ([`classify_stream`]).

mod features;
mod kmeans;
mod rbf;

pub use features::{
    apply_norm, extract_features, normalize, EventClass, FeatureVector, NormStats, FEATURE_DIM,
};
pub use kmeans::{kmeans, Cluster};
pub use rbf::{
    build_network, classify_stream, load_model, save_model, train_weights, HiddenNode,
    RbfNetwork, StreamClassification, DEFAULT_K,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BiometricError {
    #[error("event of kind {kind:?} has no feature definition")]
    UnsupportedEventKind { kind: crate::gaze::EventLabel },
    #[error("degenerate event: need at least 2 samples, got {got}")]
    DegenerateEvent { got: usize },
    #[error("no feature vectors supplied")]
    NoFeatures,
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k must be >= 1")]
    ZeroK,
    #[error("k-means needs at least {need} points, got {got}")]
    NotEnoughPoints { need: usize, got: usize },
    #[error("subject {subject} has {got} feature vectors; k = {need} requires at least {need}")]
    SubjectTooSparse { subject: String, got: usize, need: usize },
    #[error("feature of class {got:?} passed to a {expected:?} network")]
    ClassKindMismatch { expected: EventClass, got: EventClass },
    #[error("network has not been trained yet")]
    UntrainedNetwork,
    #[error("at least one network is required")]
    NoNetworks,
    #[error("the two networks disagree on the class list")]
    ClassMismatch,
    #[error("stream has no events to classify")]
    NoEvents,
    #[error("subject {0} is not among the network's classes")]
    UnknownSubject(String),
    #[error("shape mismatch: A is {a_rows}x{a_cols}, Y is {y_rows}x{y_cols}")]
    ShapeMismatch { a_rows: usize, a_cols: usize, y_rows: usize, y_cols: usize },
    #[error("model i/o: {0}")]
    ModelIo(#[from] std::io::Error),
    #[error("model format: {0}")]
    ModelFormat(#[from] serde_json::Error),
    #[error("unsupported model format_version {0}")]
    ModelVersion(u32),
}
