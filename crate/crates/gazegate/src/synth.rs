//! Deterministic synthetic gaze dataset generator.
//!
//! Each subject gets a behavioral profile (fixation duration and drift,
//! saccade amplitude, main-sequence kinematics, vertical bias) and each
//! (subject, stimulus) series is generated from its own seed derived from
//! the master seed, so generation is reproducible and parallelizable.
//! Series alternate fixations and saccades on a regular sample grid;
//! samples are labeled at generation time, and the parameters are tuned
//! so the velocity-threshold detector recovers the generated boundaries.

use rand::distributions::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::data_io::{Dataset, StimulusInfo};
use crate::evaluation::Aoi;
use crate::gaze::{
    angular_distance, wrap_azimuth, wrap_signed_delta, EventLabel, GazePoint, GazeSample,
    GazeSeries,
};
use crate::seeding::mix_seed_str;

/// Peak saccade velocity (deg/s) for a given amplitude under the main
/// sequence `v_peak = vmax * (1 - e^(-amplitude / c))`.
pub fn main_sequence_peak_velocity(amplitude_deg: f64, vmax: f64, c: f64) -> f64 {
    vmax * (1.0 - (-amplitude_deg / c).exp())
}

/// One subject's behavioral signature.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectProfile {
    pub fixation_duration_mean_ms: f64,
    pub fixation_duration_std_ms: f64,
    pub saccade_amplitude_mean_deg: f64,
    pub saccade_amplitude_std_deg: f64,
    /// Main-sequence saturation velocity, deg/s.
    pub main_sequence_vmax: f64,
    /// Main-sequence amplitude constant, degrees.
    pub main_sequence_c: f64,
    /// Offset of the subject's preferred gaze band from the equator.
    pub vertical_bias_deg: f64,
    /// Standard deviation of fixational drift, degrees.
    pub dispersion_scale_deg: f64,
}

impl SubjectProfile {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fields = [
            ("fixation_duration_mean_ms", self.fixation_duration_mean_ms),
            ("fixation_duration_std_ms", self.fixation_duration_std_ms),
            ("saccade_amplitude_mean_deg", self.saccade_amplitude_mean_deg),
            ("saccade_amplitude_std_deg", self.saccade_amplitude_std_deg),
            ("main_sequence_vmax", self.main_sequence_vmax),
            ("main_sequence_c", self.main_sequence_c),
            ("dispersion_scale_deg", self.dispersion_scale_deg),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v <= 0.0 {
                return Err(SynthError::InvalidConfig {
                    reason: format!("profile field {name} = {v} must be positive"),
                });
            }
        }
        if !self.vertical_bias_deg.is_finite() || self.vertical_bias_deg.abs() > 40.0 {
            return Err(SynthError::InvalidConfig {
                reason: format!(
                    "vertical_bias_deg = {} must stay within +/-40",
                    self.vertical_bias_deg
                ),
            });
        }
        Ok(())
    }
}

/// How subject profiles are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfilePreset {
    /// Clearly separated profiles: each parameter takes evenly spaced
    /// levels, assigned to subjects through independent shuffles so any
    /// two subjects differ in several parameters at once.
    Distinct,
    /// Profiles drawn from one common population — realistic difficulty,
    /// no separability guarantee.
    Overlapping,
}

/// Generator configuration. `Default` is the standard benchmark layout:
/// 18 subjects, 50 stimuli, 25 s at 120 Hz, seed 42, two AOIs per
/// stimulus, distinct profiles, no pursuit.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub subjects: usize,
    pub stimuli: usize,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub seed: u64,
    pub aois_per_stimulus: usize,
    pub preset: ProfilePreset,
    /// Insert one smooth-pursuit segment per series (for event-stream
    /// consumers; off for biometric benchmarks).
    pub pursuit: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            subjects: 18,
            stimuli: 50,
            duration_s: 25.0,
            rate_hz: 120.0,
            seed: 42,
            aois_per_stimulus: 2,
            preset: ProfilePreset::Distinct,
            pursuit: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |reason: String| Err(SynthError::InvalidConfig { reason });
        if self.subjects < 2 {
            return fail(format!("subjects = {} must be >= 2", self.subjects));
        }
        if self.stimuli < 2 {
            return fail(format!("stimuli = {} must be >= 2", self.stimuli));
        }
        if !self.duration_s.is_finite() || self.duration_s <= 0.0 {
            return fail(format!("duration_s = {} must be positive", self.duration_s));
        }
        if !self.rate_hz.is_finite() || !(10.0..=2000.0).contains(&self.rate_hz) {
            return fail(format!("rate_hz = {} must lie in [10, 2000]", self.rate_hz));
        }
        if self.aois_per_stimulus > 8 {
            return fail(format!(
                "aois_per_stimulus = {} exceeds the placement limit of 8",
                self.aois_per_stimulus
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {reason}")]
    InvalidConfig { reason: String },
}

/// A generated dataset plus the profiles behind it (profiles are indexed
/// like `dataset.subjects`).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub dataset: Dataset,
    pub profiles: Vec<SubjectProfile>,
}

// Fixations stay inside this polar band so azimuth distortion stays mild
// and saccade geometry is well conditioned.
const Y_BAND: (f64, f64) = (45.0, 135.0);
const MIN_FIXATION_MS: f64 = 130.0;
const MAX_FIXATION_MS: f64 = 650.0;
// The amplitude floor keeps even the slowest profile's saccades fast
// enough that the detector never confuses them with fixation drift: at
// 4.5 degrees the end-to-end displacement over the saccade window implies
// well over the 70 deg/s threshold for every preset profile.
const MIN_AMPLITUDE: f64 = 4.5;
const MAX_AMPLITUDE: f64 = 20.0;
/// Fraction of fixations aimed into a designated AOI.
const AOI_TARGET_RATE: f64 = 0.10;
const PURSUIT_VELOCITY_DEG_S: f64 = 100.0;
const PURSUIT_DURATION_MS: f64 = 300.0;

/// Fraction of a saccade's duration spent accelerating (and, symmetrically,
/// decelerating). The velocity profile is a trapezoid: linear ramp up over
/// the first `SACCADE_RAMP_FRACTION` of the movement, a plateau at the
/// main-sequence peak velocity, then a linear ramp down.
const SACCADE_RAMP_FRACTION: f64 = 0.2;

/// Position fraction along a saccade at normalized time `u` in `[0, 1]`,
/// for the trapezoidal velocity profile. The plateau holds the peak
/// velocity exactly, and even the opening ramp covers enough ground that a
/// velocity-threshold detector flags the movement from its first full
/// sample interval onward.
fn saccade_position_fraction(u: f64) -> f64 {
    let r = SACCADE_RAMP_FRACTION;
    // Normalization so that f(1) = 1: the trapezoid's area is (1 - r)
    // times the plateau velocity over a unit interval.
    if u < r {
        u * u / (2.0 * r) / (1.0 - r)
    } else if u <= 1.0 - r {
        (u - r / 2.0) / (1.0 - r)
    } else {
        let w = 1.0 - u;
        1.0 - w * w / (2.0 * r) / (1.0 - r)
    }
}

fn normal_clamped(rng: &mut ChaCha8Rng, mean: f64, std: f64, lo: f64, hi: f64) -> f64 {
    let dist = Normal::new(mean, std).expect("validated std");
    dist.sample(rng).clamp(lo, hi)
}

/// Evenly spaced parameter levels shuffled independently per parameter,
/// so subjects differ along many axes rather than one shared ramp.
fn distinct_profiles(c: usize, seed: u64) -> Vec<SubjectProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed_str(seed, &["profiles", "distinct"]));
    let level = |i: usize| i as f64 / (c - 1).max(1) as f64;
    let mut shuffled_levels = |lo: f64, hi: f64| -> Vec<f64> {
        let mut values: Vec<f64> = (0..c).map(|i| lo + (hi - lo) * level(i)).collect();
        // Fisher-Yates with the shared generator keeps layouts reproducible.
        for i in (1..values.len()).rev() {
            let j = rng.gen_range(0..=i);
            values.swap(i, j);
        }
        values
    };
    let durations = shuffled_levels(200.0, 280.0);
    let amplitudes = shuffled_levels(6.0, 15.0);
    let vmaxes = shuffled_levels(350.0, 600.0);
    let cs = shuffled_levels(2.5, 4.0);
    let biases = shuffled_levels(-15.0, 15.0);
    let dispersions = shuffled_levels(0.08, 0.40);
    (0..c)
        .map(|i| SubjectProfile {
            fixation_duration_mean_ms: durations[i],
            fixation_duration_std_ms: 30.0,
            saccade_amplitude_mean_deg: amplitudes[i],
            saccade_amplitude_std_deg: 1.5,
            main_sequence_vmax: vmaxes[i],
            main_sequence_c: cs[i],
            vertical_bias_deg: biases[i],
            dispersion_scale_deg: dispersions[i],
        })
        .collect()
}

/// Profiles drawn from one common population.
fn overlapping_profiles(c: usize, seed: u64) -> Vec<SubjectProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed_str(seed, &["profiles", "overlapping"]));
    (0..c)
        .map(|_| SubjectProfile {
            fixation_duration_mean_ms: normal_clamped(&mut rng, 240.0, 25.0, 170.0, 330.0),
            fixation_duration_std_ms: 30.0,
            saccade_amplitude_mean_deg: normal_clamped(&mut rng, 9.0, 2.0, 6.0, 15.0),
            saccade_amplitude_std_deg: 1.5,
            main_sequence_vmax: normal_clamped(&mut rng, 475.0, 60.0, 350.0, 650.0),
            main_sequence_c: normal_clamped(&mut rng, 3.2, 0.5, 2.5, 4.2),
            vertical_bias_deg: normal_clamped(&mut rng, 0.0, 7.0, -20.0, 20.0),
            dispersion_scale_deg: normal_clamped(&mut rng, 0.22, 0.07, 0.06, 0.45),
        })
        .collect()
}

/// Profiles for a preset; deterministic in (preset, seed, C).
pub fn subject_profiles(preset: ProfilePreset, subjects: usize, seed: u64) -> Vec<SubjectProfile> {
    match preset {
        ProfilePreset::Distinct => distinct_profiles(subjects, seed),
        ProfilePreset::Overlapping => overlapping_profiles(subjects, seed),
    }
}

fn make_aois(stimulus_id: &str, count: usize, seed: u64) -> Vec<Aoi> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed_str(seed, &["aois", stimulus_id]));
    (0..count)
        .map(|i| {
            let w = rng.gen_range(30.0..60.0);
            let h = rng.gen_range(20.0..40.0);
            let x0 = rng.gen_range(10.0..350.0 - w);
            let y0 = rng.gen_range(50.0..130.0 - h);
            Aoi::new(format!("aoi{i}"), x0, x0 + w, y0, y0 + h)
                .expect("generated box is in-domain by construction")
        })
        .collect()
}

#[derive(Debug)]
enum PhaseKind {
    Fixation { cx: f64, cy: f64 },
    /// Travel from (x0, y0) by (dx, dy), azimuth wrapping.
    Saccade { x0: f64, y0: f64, dx: f64, dy: f64 },
    Pursuit { x0: f64, y0: f64 },
}

#[derive(Debug)]
struct Phase {
    kind: PhaseKind,
    start_ms: f64,
    end_ms: f64,
}

struct PhasePlan {
    phases: Vec<Phase>,
}

/// Builds the fixation/saccade schedule for one series.
fn plan_phases(
    cfg: &SynthConfig,
    profile: &SubjectProfile,
    aois: &[Aoi],
    rng: &mut ChaCha8Rng,
) -> PhasePlan {
    let duration_ms = cfg.duration_s * 1000.0;
    let mut phases: Vec<Phase> = Vec::new();
    let mut t = 0.0;

    let band_center = (90.0 + profile.vertical_bias_deg).clamp(Y_BAND.0 + 15.0, Y_BAND.1 - 15.0);
    let mut x = rng.gen_range(0.0..360.0);
    let mut y = normal_clamped(rng, band_center, 8.0, Y_BAND.0, Y_BAND.1);
    let mut pursuit_pending = cfg.pursuit;

    loop {
        // Fixation at the current position.
        let dur = normal_clamped(
            rng,
            profile.fixation_duration_mean_ms,
            profile.fixation_duration_std_ms,
            MIN_FIXATION_MS,
            MAX_FIXATION_MS,
        );
        let start = t;
        t += dur;
        phases.push(Phase { kind: PhaseKind::Fixation { cx: x, cy: y }, start_ms: start, end_ms: t });

        if pursuit_pending && t >= duration_ms / 2.0 {
            // One constant-velocity sweep along the azimuth.
            pursuit_pending = false;
            if t + PURSUIT_DURATION_MS + MIN_FIXATION_MS < duration_ms {
                let start = t;
                t += PURSUIT_DURATION_MS;
                phases.push(Phase {
                    kind: PhaseKind::Pursuit { x0: x, y0: y },
                    start_ms: start,
                    end_ms: t,
                });
                x = wrap_azimuth(x + PURSUIT_VELOCITY_DEG_S * PURSUIT_DURATION_MS / 1000.0);
                continue;
            }
        }

        // Pick the next fixation target: mostly a random walk, sometimes a
        // designated AOI.
        let (x1, y1, amplitude) = {
            let aoi_target = !aois.is_empty() && rng.gen_bool(AOI_TARGET_RATE);
            let mut target = None;
            if aoi_target {
                let aoi = &aois[rng.gen_range(0..aois.len())];
                let margin = 2.0;
                let tx = rng.sample(Uniform::new(aoi.x_min + margin, aoi.x_max - margin));
                let ty = rng
                    .sample(Uniform::new(aoi.y_min + margin, aoi.y_max - margin))
                    .clamp(Y_BAND.0, Y_BAND.1);
                let a = angular_distance(GazePoint::new(x, y), GazePoint::new(tx, ty));
                if (MIN_AMPLITUDE..=MAX_AMPLITUDE).contains(&a) {
                    target = Some((tx, ty, a));
                }
            }
            target.unwrap_or_else(|| {
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let a = normal_clamped(
                    rng,
                    profile.saccade_amplitude_mean_deg,
                    profile.saccade_amplitude_std_deg,
                    MIN_AMPLITUDE,
                    MAX_AMPLITUDE,
                );
                let mut dy = a * theta.sin();
                if y + dy < Y_BAND.0 || y + dy > Y_BAND.1 {
                    dy = -dy;
                }
                let ty = (y + dy).clamp(Y_BAND.0, Y_BAND.1);
                // Azimuth distance shrinks by sin(polar angle); widen the
                // x step to keep the great-circle amplitude near `a`.
                let y_mid = ((y + ty) / 2.0).to_radians();
                let dx = a * theta.cos() / y_mid.sin();
                (wrap_azimuth(x + dx), ty, a)
            })
        };

        let v_peak =
            main_sequence_peak_velocity(amplitude, profile.main_sequence_vmax, profile.main_sequence_c);
        // Trapezoidal profile: mean velocity is (1 - ramp) of the peak, so
        // the duration that realizes the main-sequence peak is A / ((1-r) v).
        let sacc_ms = amplitude / ((1.0 - SACCADE_RAMP_FRACTION) * v_peak) * 1000.0;
        if t + sacc_ms + MIN_FIXATION_MS > duration_ms {
            // No room for another saccade + fixation: stretch the last
            // fixation to the end of the stimulus.
            phases.last_mut().expect("at least one fixation").end_ms = duration_ms;
            break;
        }
        let dx = wrap_signed_delta(x1 - x);
        let dy = y1 - y;
        let start = t;
        t += sacc_ms;
        phases.push(Phase {
            kind: PhaseKind::Saccade { x0: x, y0: y, dx, dy },
            start_ms: start,
            end_ms: t,
        });
        x = x1;
        y = y1;
    }
    PhasePlan { phases }
}

/// Renders a phase plan onto the regular sample grid.
fn render_samples(
    cfg: &SynthConfig,
    profile: &SubjectProfile,
    plan: &PhasePlan,
    rng: &mut ChaCha8Rng,
) -> Vec<GazeSample> {
    let dt_ms = 1000.0 / cfg.rate_hz;
    let n = (cfg.duration_s * cfg.rate_hz).round() as usize;
    // Keep fixational drift comfortably below the detector's velocity
    // threshold even at the tails of the jitter distribution.
    let max_step = 0.6 * 70.0 * dt_ms / 1000.0;
    let ar = 0.85_f64;
    let step_std = profile.dispersion_scale_deg * (1.0 - ar * ar).sqrt();

    let mut samples = Vec::with_capacity(n);
    let mut phase_idx = 0usize;
    let mut jitter: Option<(f64, f64)> = None; // state within the current fixation

    for k in 0..n {
        let t = k as f64 * dt_ms;
        while phase_idx + 1 < plan.phases.len() && t >= plan.phases[phase_idx].end_ms {
            phase_idx += 1;
            jitter = None;
        }
        let phase = &plan.phases[phase_idx];
        let (x, y, label) = match phase.kind {
            PhaseKind::Fixation { cx, cy } => {
                let (jx, jy) = match jitter {
                    None => {
                        let jx = rng.sample(Normal::new(0.0, profile.dispersion_scale_deg).unwrap());
                        let jy = rng.sample(Normal::new(0.0, profile.dispersion_scale_deg).unwrap());
                        clamp_step(jx, jy, max_step)
                    }
                    Some((px, py)) => {
                        let nx = ar * px + rng.sample(Normal::new(0.0, step_std).unwrap());
                        let ny = ar * py + rng.sample(Normal::new(0.0, step_std).unwrap());
                        let (dx, dy) = clamp_step(nx - px, ny - py, max_step);
                        (px + dx, py + dy)
                    }
                };
                jitter = Some((jx, jy));
                (wrap_azimuth(cx + jx), (cy + jy).clamp(1.0, 179.0), EventLabel::Fixation)
            }
            PhaseKind::Saccade { x0, y0, dx, dy } => {
                let u = (t - phase.start_ms) / (phase.end_ms - phase.start_ms);
                let f = saccade_position_fraction(u);
                (wrap_azimuth(x0 + dx * f), (y0 + dy * f).clamp(1.0, 179.0), EventLabel::Saccade)
            }
            PhaseKind::Pursuit { x0, y0 } => {
                let dx = PURSUIT_VELOCITY_DEG_S * (t - phase.start_ms) / 1000.0;
                (wrap_azimuth(x0 + dx), y0, EventLabel::SmoothPursuit)
            }
        };
        samples.push(GazeSample::new(x, y, t, label));
    }
    samples
}

fn clamp_step(dx: f64, dy: f64, max_step: f64) -> (f64, f64) {
    let len = (dx * dx + dy * dy).sqrt();
    if len > max_step {
        let scale = max_step / len;
        (dx * scale, dy * scale)
    } else {
        (dx, dy)
    }
}

/// Generates one series; deterministic in (cfg.seed, subject, stimulus).
fn generate_series(
    cfg: &SynthConfig,
    profile: &SubjectProfile,
    subject_id: &str,
    stimulus_id: &str,
    aois: &[Aoi],
) -> GazeSeries {
    let mut rng =
        ChaCha8Rng::seed_from_u64(mix_seed_str(cfg.seed, &[subject_id, stimulus_id]));
    let plan = plan_phases(cfg, profile, aois, &mut rng);
    let samples = render_samples(cfg, profile, &plan, &mut rng);
    GazeSeries::new(samples, cfg.rate_hz, subject_id, stimulus_id)
        .expect("generated samples satisfy the domain invariants")
}

fn id_width(count: usize) -> usize {
    count.to_string().len().max(2)
}

/// Generates the full dataset: one series per subject x stimulus, AOIs per
/// stimulus, and the profiles used. Same config in, bit-identical dataset
/// out; per-series work runs in parallel without affecting the result.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<GeneratedDataset, SynthError> {
    cfg.validate()?;
    let profiles = subject_profiles(cfg.preset, cfg.subjects, cfg.seed);
    for p in &profiles {
        p.validate()?;
    }

    let sw = id_width(cfg.subjects);
    let tw = id_width(cfg.stimuli);
    let subject_ids: Vec<String> =
        (1..=cfg.subjects).map(|i| format!("s{i:0sw$}")).collect();
    let stimulus_ids: Vec<String> =
        (1..=cfg.stimuli).map(|i| format!("stim{i:0tw$}")).collect();

    let stimuli: Vec<StimulusInfo> = stimulus_ids
        .iter()
        .map(|id| StimulusInfo {
            id: id.clone(),
            duration_s: cfg.duration_s,
            aois: make_aois(id, cfg.aois_per_stimulus, cfg.seed),
        })
        .collect();

    let pairs: Vec<(usize, usize)> = (0..cfg.subjects)
        .flat_map(|s| (0..cfg.stimuli).map(move |t| (s, t)))
        .collect();
    let series: Vec<GazeSeries> = pairs
        .par_iter()
        .map(|&(si, ti)| {
            generate_series(
                cfg,
                &profiles[si],
                &subject_ids[si],
                &stimulus_ids[ti],
                &stimuli[ti].aois,
            )
        })
        .collect();

    let name = format!(
        "synth_c{}_s{}_seed{}_{}",
        cfg.subjects,
        cfg.stimuli,
        cfg.seed,
        match cfg.preset {
            ProfilePreset::Distinct => "distinct",
            ProfilePreset::Overlapping => "overlapping",
        }
    );
    let mut dataset = Dataset::new(name, cfg.rate_hz, subject_ids, stimuli);
    for s in series {
        dataset.insert(s).expect("generated keys are declared and unique");
    }
    Ok(GeneratedDataset { dataset, profiles })
}
