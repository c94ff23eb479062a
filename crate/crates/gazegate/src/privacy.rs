//! Privacy mechanisms for gaze series.
//!
//! Three mechanisms trade identity leakage against analytic utility:
//!
//! * **Gaussian noise** — adds independent per-axis `N(0, sigma)` noise to
//!   every sample; azimuth wraps modulo 360, polar angle clamps into
//!   `[0, 180)`.
//! * **Temporal downsampling** — keeps every K-th sample starting with the
//!   first and divides the nominal rate by K. No interpolation.
//! * **Spatial downsampling** — quantizes positions onto a grid derived
//!   from a 3840x2160 reference raster by a factor L: cell size is
//!   `delta_x = 360/(3840/L)` by `delta_y = 180/(2160/L)` degrees, and each
//!   position snaps to its cell's lower-left corner (floor on both axes).
//!
//! Canonical textual forms: `identity`, `gaussian:SIGMA:SEED`,
//! `temporal:K`, `spatial:L`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::gaze::{clamp_polar, wrap_azimuth, GazeSample, GazeSeries};
use crate::seeding::mix_seed_str;

/// Horizontal pixel count of the reference raster the spatial grid divides.
pub const REFERENCE_WIDTH: u32 = 3840;
/// Vertical pixel count of the reference raster.
pub const REFERENCE_HEIGHT: u32 = 2160;

#[derive(Debug, Error)]
pub enum PrivacyError {
    #[error("sigma must be finite and non-negative, got {sigma}")]
    InvalidSigma { sigma: f64 },
    #[error("temporal factor K must be >= 1")]
    InvalidTemporalFactor,
    #[error(
        "invalid spatial factor {l}: L must be a positive divisor of {REFERENCE_WIDTH} \
         (e.g. 1, 2, 3, 4, 6, 8, 16, 64)"
    )]
    InvalidSpatialFactor { l: u32 },
    #[error("cannot parse mechanism '{input}': {reason}")]
    Parse { input: String, reason: String },
}

/// Which transformation to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mechanism {
    Identity,
    Gaussian { sigma: f64 },
    Temporal { k: u32 },
    Spatial { l: u32 },
}

/// A mechanism plus the RNG seed it may need. Only Gaussian consumes the
/// seed; the others are deterministic functions of the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismConfig {
    pub mechanism: Mechanism,
    pub rng_seed: u64,
}

impl MechanismConfig {
    pub fn identity() -> Self {
        MechanismConfig { mechanism: Mechanism::Identity, rng_seed: 0 }
    }

    pub fn gaussian(sigma: f64, rng_seed: u64) -> Result<Self, PrivacyError> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(PrivacyError::InvalidSigma { sigma });
        }
        Ok(MechanismConfig { mechanism: Mechanism::Gaussian { sigma }, rng_seed })
    }

    pub fn temporal(k: u32) -> Result<Self, PrivacyError> {
        if k == 0 {
            return Err(PrivacyError::InvalidTemporalFactor);
        }
        Ok(MechanismConfig { mechanism: Mechanism::Temporal { k }, rng_seed: 0 })
    }

    pub fn spatial(l: u32) -> Result<Self, PrivacyError> {
        SpatialGrid::new(l)?;
        Ok(MechanismConfig { mechanism: Mechanism::Spatial { l }, rng_seed: 0 })
    }

    /// Config with a different seed (used to redraw noise per evaluation run).
    pub fn with_seed(self, rng_seed: u64) -> Self {
        MechanismConfig { rng_seed, ..self }
    }
}

impl fmt::Display for MechanismConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mechanism {
            Mechanism::Identity => write!(f, "identity"),
            Mechanism::Gaussian { sigma } => write!(f, "gaussian:{}:{}", sigma, self.rng_seed),
            Mechanism::Temporal { k } => write!(f, "temporal:{k}"),
            Mechanism::Spatial { l } => write!(f, "spatial:{l}"),
        }
    }
}

impl FromStr for MechanismConfig {
    type Err = PrivacyError;

    fn from_str(input: &str) -> Result<Self, PrivacyError> {
        let parse_err = |reason: &str| PrivacyError::Parse {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let parts: Vec<&str> = input.split(':').collect();
        match parts.as_slice() {
            ["identity"] => Ok(MechanismConfig::identity()),
            ["gaussian", sigma, seed] => {
                let sigma: f64 =
                    sigma.parse().map_err(|_| parse_err("SIGMA must be a real number"))?;
                let seed: u64 =
                    seed.parse().map_err(|_| parse_err("SEED must be an unsigned integer"))?;
                MechanismConfig::gaussian(sigma, seed)
            }
            ["gaussian", ..] => Err(parse_err("expected gaussian:SIGMA:SEED")),
            ["temporal", k] => {
                let k: u32 = k.parse().map_err(|_| parse_err("K must be a positive integer"))?;
                MechanismConfig::temporal(k)
            }
            ["spatial", l] => {
                let l: u32 = l.parse().map_err(|_| parse_err("L must be a positive integer"))?;
                MechanismConfig::spatial(l)
            }
            _ => Err(parse_err(
                "expected identity, gaussian:SIGMA:SEED, temporal:K, or spatial:L",
            )),
        }
    }
}

/// The quantization grid implied by a spatial factor L.
///
/// The grid divides the 3840x2160 reference raster into L x L pixel blocks:
/// `cols = 3840 / L` exactly (L must divide 3840), while the row count
/// `2160 / L` may be fractional, leaving a partial cell row at the bottom
/// of the domain (e.g. L = 64 gives 33.75 rows). Cell sizes in degrees are
/// exact: `delta_x = 3L/32`, `delta_y = L/12`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    pub l: u32,
    /// Column count; `cols * delta_x = 360` exactly.
    pub cols: u32,
    /// Row count as a real; `rows * delta_y = 180` in exact arithmetic.
    pub rows: f64,
    pub delta_x: f64,
    pub delta_y: f64,
}

impl SpatialGrid {
    pub fn new(l: u32) -> Result<Self, PrivacyError> {
        if l == 0 || REFERENCE_WIDTH % l != 0 {
            return Err(PrivacyError::InvalidSpatialFactor { l });
        }
        let cols = REFERENCE_WIDTH / l;
        Ok(SpatialGrid {
            l,
            cols,
            rows: REFERENCE_HEIGHT as f64 / l as f64,
            delta_x: 360.0 / cols as f64,
            delta_y: 180.0 * l as f64 / REFERENCE_HEIGHT as f64,
        })
    }

    /// Snaps a coordinate to the lower corner of its cell on one axis.
    ///
    /// Computed as `floor(v / delta) * delta` with a post-correction so the
    /// result is *exactly* the cell whose float boundaries contain `v`
    /// (matching a scan over `k*delta <= v < (k+1)*delta`), even when the
    /// division rounds across a cell boundary.
    fn snap(v: f64, delta: f64) -> f64 {
        let mut k = (v / delta).floor();
        if k * delta > v {
            k -= 1.0;
        } else if (k + 1.0) * delta <= v {
            k += 1.0;
        }
        k * delta
    }

    /// Quantizes a position to its cell's lower-left corner.
    pub fn quantize(&self, x: f64, y: f64) -> (f64, f64) {
        (Self::snap(x, self.delta_x), Self::snap(y, self.delta_y))
    }
}

/// Per-sample noise draw for the Gaussian mechanism: sample `index` gets its
/// own counter-mode RNG stream, so any sample's noise is reproducible from
/// `(seed, index, axis)` alone — axis 0 (x) is drawn first, axis 1 (y)
/// second — regardless of how the series is chunked across workers.
fn noise_pair(seed: u64, index: u64, sigma: f64) -> (f64, f64) {
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (normal.sample(&mut rng), normal.sample(&mut rng))
}

/// Adds independent `N(0, sigma)` noise to both axes of every sample.
/// Azimuth wraps modulo 360; polar angle clamps into `[0, 180)`.
/// Timestamps, labels, and metadata are untouched. `sigma = 0` is the
/// identity on positions.
pub fn apply_gaussian(
    series: &GazeSeries,
    sigma: f64,
    seed: u64,
) -> Result<GazeSeries, PrivacyError> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(PrivacyError::InvalidSigma { sigma });
    }
    if sigma == 0.0 {
        return Ok(series.clone());
    }
    let noisy = series
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (nx, ny) = noise_pair(seed, i as u64, sigma);
            GazeSample {
                x: wrap_azimuth(s.x + nx),
                y: clamp_polar(s.y + ny),
                ..*s
            }
        })
        .collect();
    Ok(series.with_samples(noisy).expect("wrap/clamp keep samples in domain"))
}

/// Keeps samples at indices 0, K, 2K, ... (the 1st, K+1-th, ... samples)
/// and divides the nominal sampling rate by K. Timestamps of kept samples
/// are unchanged; nothing is interpolated.
pub fn apply_temporal(series: &GazeSeries, k: u32) -> Result<GazeSeries, PrivacyError> {
    if k == 0 {
        return Err(PrivacyError::InvalidTemporalFactor);
    }
    let kept: Vec<GazeSample> = series
        .samples()
        .iter()
        .step_by(k as usize)
        .cloned()
        .collect();
    let out = series
        .with_samples(kept)
        .expect("subsequence of a valid series is valid")
        .with_rate(series.sampling_rate_hz() / k as f64)
        .expect("positive rate divided by positive K");
    Ok(out)
}

/// Quantizes every sample position onto the [`SpatialGrid`] for factor L.
pub fn apply_spatial(series: &GazeSeries, l: u32) -> Result<GazeSeries, PrivacyError> {
    let grid = SpatialGrid::new(l)?;
    let snapped = series
        .samples()
        .iter()
        .map(|s| {
            let (x, y) = grid.quantize(s.x, s.y);
            GazeSample { x, y, ..*s }
        })
        .collect();
    Ok(series.with_samples(snapped).expect("quantization keeps samples in domain"))
}

/// Applies a configured mechanism to one series.
///
/// For Gaussian noise the effective seed is derived from
/// `(config.rng_seed, subject_id, stimulus_id)` so distinct recordings in a
/// dataset receive independent noise while identical inputs stay
/// bit-identical across runs.
pub fn apply_mechanism(
    series: &GazeSeries,
    config: &MechanismConfig,
) -> Result<GazeSeries, PrivacyError> {
    match config.mechanism {
        Mechanism::Identity => Ok(series.clone()),
        Mechanism::Gaussian { sigma } => {
            let seed =
                mix_seed_str(config.rng_seed, &[series.subject_id(), series.stimulus_id()]);
            apply_gaussian(series, sigma, seed)
        }
        Mechanism::Temporal { k } => apply_temporal(series, k),
        Mechanism::Spatial { l } => apply_spatial(series, l),
    }
}
