//! Privacy-preserving gaze data toolkit.
//!
//! The crate is organized around the life cycle of a gaze recording:
//!
//! * [`gaze`] — core sample/series types, spherical geometry, velocity-threshold
//!   event detection and event segmentation.
//! * [`privacy`] — the three privacy mechanisms (additive Gaussian noise,
//!   temporal downsampling, spatial downsampling) plus an identity baseline.
//! * [`biometric`] — the RBF-network re-identification attack used to measure
//!   how much identity leaks through a mechanism.
//! * [`evaluation`] — identification-rate experiments and utility metrics
//!   (AOI dwell time, saliency-map divergence, gaze prediction error).
//! * [`gatekeeper`] — a query-gated replay server that answers aggregate
//!   questions about a recording without ever exposing raw samples.
//! * [`synth`] — a synthetic gaze-dataset generator with per-subject
//!   oculomotor signatures.
//! * [`data_io`] — the on-disk recording/manifest formats.
//! * [`cli`] — the `gazegate` command-line front end over all of the above.
//!
//! Each major capability has a runnable demo under `examples/`; start with
//! `cargo run --example synthesize_dataset`.

pub mod biometric;
pub mod cli;
pub mod data_io;
pub mod evaluation;
pub mod gatekeeper;
pub mod gaze;
pub mod privacy;
pub mod seeding;
pub mod synth;

pub use seeding::mix_seed;
