//! Velocity-threshold event detection and run segmentation.

use std::ops::Range;

use super::geometry::{angular_distance, wrap_signed_delta};
use super::{EventLabel, GazeError, GazePoint, GazeSample, GazeSeries};

/// Parameters for the velocity-threshold detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvtParams {
    /// Samples moving faster than this (deg/s) are saccade candidates;
    /// exactly at the threshold counts as fixation.
    pub velocity_threshold: f64,
    /// Fixation runs shorter than this are absorbed by their neighbors.
    pub min_fixation_ms: f64,
    /// Above-threshold runs longer than this are not physiological saccades
    /// and are relabeled smooth pursuit.
    pub max_saccade_ms: f64,
    /// Gaps between fixations shorter than this may merge (see
    /// [`detect_events_ivt`] for the displacement condition).
    pub merge_gap_ms: f64,
}

impl Default for IvtParams {
    fn default() -> Self {
        IvtParams {
            velocity_threshold: 70.0,
            min_fixation_ms: 100.0,
            max_saccade_ms: 150.0,
            merge_gap_ms: 75.0,
        }
    }
}

impl IvtParams {
    pub fn validate(&self) -> Result<(), GazeError> {
        let fields = [
            ("velocity_threshold", self.velocity_threshold),
            ("min_fixation_ms", self.min_fixation_ms),
            ("max_saccade_ms", self.max_saccade_ms),
            ("merge_gap_ms", self.merge_gap_ms),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v <= 0.0 {
                return Err(GazeError::InvalidParams {
                    reason: format!("{name} must be strictly positive, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Per-sample angular velocity in deg/s.
///
/// `v[0] = 0`; `v[i]` is the great-circle distance from sample `i-1` to
/// sample `i` divided by the elapsed time.
pub fn sample_velocity(series: &GazeSeries) -> Result<Vec<f64>, GazeError> {
    let samples = series.samples();
    let mut v = Vec::with_capacity(samples.len());
    if samples.is_empty() {
        return Ok(v);
    }
    v.push(0.0);
    for i in 1..samples.len() {
        let dt_s = (samples[i].t_ms - samples[i - 1].t_ms) / 1000.0;
        if dt_s <= 0.0 {
            return Err(GazeError::ZeroTimeGap { index: i });
        }
        v.push(angular_distance(samples[i - 1].point(), samples[i].point()) / dt_s);
    }
    Ok(v)
}

/// Maximal runs of identical labels as `(label, start..=end)` index pairs.
fn label_runs(labels: &[EventLabel]) -> Vec<(EventLabel, usize, usize)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            runs.push((labels[start], start, i - 1));
            start = i;
        }
    }
    runs
}

/// Relabels a series with the velocity-threshold detector.
///
/// Pipeline, in order:
/// 1. samples with velocity strictly above `velocity_threshold` become
///    saccade, all others fixation (the first sample has velocity 0);
/// 2. saccade runs lasting longer than `max_saccade_ms` become smooth
///    pursuit — sustained high velocity is pursuit or noise, not a saccade;
/// 3. a saccade run between two fixations merges into them when the gap is
///    shorter than `merge_gap_ms` *and* the displacement between the
///    flanking fixation samples, read as drift across the gap, stays at or
///    below `velocity_threshold` — so jitter blips merge but a genuine
///    20 ms saccade that actually lands somewhere else survives;
/// 4. fixation runs shorter than `min_fixation_ms` are absorbed into the
///    neighboring event (the longer neighbor when the two disagree).
///
/// Output labels depend only on sample geometry, so the detector is
/// idempotent: running it on its own output reproduces the labels.
pub fn detect_events_ivt(series: &GazeSeries, params: &IvtParams) -> Result<GazeSeries, GazeError> {
    params.validate()?;
    if series.len() < 2 {
        return Err(GazeError::TooShort { need: 2, got: series.len() });
    }
    let samples = series.samples();
    let t = |i: usize| samples[i].t_ms;
    let velocities = sample_velocity(series)?;

    let mut labels: Vec<EventLabel> = velocities
        .iter()
        .map(|&v| {
            if v > params.velocity_threshold {
                EventLabel::Saccade
            } else {
                EventLabel::Fixation
            }
        })
        .collect();

    // Pass 2: over-long saccade runs are smooth pursuit.
    for (label, start, end) in label_runs(&labels) {
        if label == EventLabel::Saccade && t(end) - t(start) > params.max_saccade_ms {
            labels[start..=end].fill(EventLabel::SmoothPursuit);
        }
    }

    // Pass 3: merge fixations across short, near-stationary gaps.
    loop {
        let runs = label_runs(&labels);
        let mut changed = false;
        for (ri, &(label, start, end)) in runs.iter().enumerate() {
            if label != EventLabel::Saccade || ri == 0 || ri + 1 == runs.len() {
                continue;
            }
            let (prev_label, _, prev_end) = runs[ri - 1];
            let (next_label, next_start, _) = runs[ri + 1];
            if prev_label != EventLabel::Fixation || next_label != EventLabel::Fixation {
                continue;
            }
            let gap_ms = t(next_start) - t(prev_end);
            if gap_ms >= params.merge_gap_ms {
                continue;
            }
            let drift =
                angular_distance(samples[prev_end].point(), samples[next_start].point());
            if drift / (gap_ms / 1000.0) <= params.velocity_threshold {
                labels[start..=end].fill(EventLabel::Fixation);
                changed = true;
                break; // runs changed; recompute
            }
        }
        if !changed {
            break;
        }
    }

    // Pass 4: absorb too-short fixation runs into their neighbors.
    loop {
        let runs = label_runs(&labels);
        let mut changed = false;
        for (ri, &(label, start, end)) in runs.iter().enumerate() {
            if label != EventLabel::Fixation || t(end) - t(start) >= params.min_fixation_ms {
                continue;
            }
            let prev = if ri > 0 { Some(runs[ri - 1]) } else { None };
            let next = if ri + 1 < runs.len() { Some(runs[ri + 1]) } else { None };
            let replacement = match (prev, next) {
                (None, None) => continue, // whole series is one short fixation
                (Some((l, ..)), None) | (None, Some((l, ..))) => l,
                (Some((lp, sp, ep)), Some((ln, sn, en))) => {
                    if lp == ln {
                        lp
                    } else if t(ep) - t(sp) >= t(en) - t(sn) {
                        lp
                    } else {
                        ln
                    }
                }
            };
            labels[start..=end].fill(replacement);
            changed = true;
            break;
        }
        if !changed {
            break;
        }
    }

    let relabeled = samples
        .iter()
        .zip(&labels)
        .map(|(s, &label)| GazeSample { label, ..*s })
        .collect();
    series.with_samples(relabeled)
}

/// A segmented oculomotor event: one maximal run of identically labeled
/// samples, with derived statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeEvent {
    pub kind: EventLabel,
    pub start_ms: f64,
    pub end_ms: f64,
    /// `end_ms - start_ms`.
    pub duration_ms: f64,
    /// Duration-weighted mean position of member samples (degrees).
    pub centroid_x: f64,
    pub centroid_y: f64,
    /// Great-circle distance between the first and last sample (degrees).
    pub amplitude_deg: f64,
    /// Path length divided by duration (deg/s); 0 for single-sample events.
    pub mean_velocity: f64,
    /// Largest sample-to-sample velocity within the event (deg/s).
    pub peak_velocity: f64,
    /// Mean angular distance of member samples to the centroid (degrees).
    pub dispersion_deg: f64,
    /// Population standard deviation of within-event sample velocities.
    pub velocity_std: f64,
    /// Position of the first sample.
    pub start_x: f64,
    pub start_y: f64,
    /// Position of the last sample (the landing point for saccades).
    pub end_x: f64,
    pub end_y: f64,
    /// Index span into the parent series.
    pub sample_range: Range<usize>,
}

impl GazeEvent {
    pub fn centroid(&self) -> GazePoint {
        GazePoint::new(self.centroid_x, self.centroid_y)
    }

    pub fn landing(&self) -> GazePoint {
        GazePoint::new(self.end_x, self.end_y)
    }

    /// Direction of the first-to-last displacement in degrees `[0, 360)`,
    /// measured counterclockwise from east (east = increasing azimuth,
    /// north = decreasing polar angle). Returns 0 for zero displacement.
    pub fn direction_deg(&self) -> f64 {
        let dx = wrap_signed_delta(self.end_x - self.start_x);
        let dy = self.end_y - self.start_y;
        if dx == 0.0 && dy == 0.0 {
            return 0.0;
        }
        let deg = (-dy).atan2(dx).to_degrees();
        if deg < 0.0 {
            deg + 360.0
        } else {
            deg
        }
    }

    fn from_run(samples: &[GazeSample], range: Range<usize>) -> GazeEvent {
        let run = &samples[range.clone()];
        let n = run.len();
        let start_ms = run[0].t_ms;
        let end_ms = run[n - 1].t_ms;
        let duration_ms = end_ms - start_ms;

        // Duration weights: forward gap per sample, last sample reuses the
        // final gap so a trailing plateau counts fully.
        let weights: Vec<f64> = if n == 1 {
            vec![1.0]
        } else {
            (0..n)
                .map(|i| {
                    if i + 1 < n {
                        run[i + 1].t_ms - run[i].t_ms
                    } else {
                        run[n - 1].t_ms - run[n - 2].t_ms
                    }
                })
                .collect()
        };
        let wsum: f64 = weights.iter().sum();
        let centroid_x = run.iter().zip(&weights).map(|(s, w)| s.x * w).sum::<f64>() / wsum;
        let centroid_y = run.iter().zip(&weights).map(|(s, w)| s.y * w).sum::<f64>() / wsum;
        let centroid = GazePoint::new(centroid_x, centroid_y);

        let mut seg_velocities = Vec::with_capacity(n.saturating_sub(1));
        let mut path = 0.0;
        for i in 1..n {
            let d = angular_distance(run[i - 1].point(), run[i].point());
            path += d;
            seg_velocities.push(d / ((run[i].t_ms - run[i - 1].t_ms) / 1000.0));
        }
        let mean_velocity = if duration_ms > 0.0 { path / (duration_ms / 1000.0) } else { 0.0 };
        let peak_velocity = seg_velocities.iter().cloned().fold(0.0, f64::max);
        let velocity_std = if seg_velocities.len() > 1 {
            let m = seg_velocities.iter().sum::<f64>() / seg_velocities.len() as f64;
            (seg_velocities.iter().map(|v| (v - m).powi(2)).sum::<f64>()
                / seg_velocities.len() as f64)
                .sqrt()
        } else {
            0.0
        };
        let dispersion_deg =
            run.iter().map(|s| angular_distance(s.point(), centroid)).sum::<f64>() / n as f64;

        GazeEvent {
            kind: run[0].label,
            start_ms,
            end_ms,
            duration_ms,
            centroid_x,
            centroid_y,
            amplitude_deg: angular_distance(run[0].point(), run[n - 1].point()),
            mean_velocity,
            peak_velocity,
            dispersion_deg,
            velocity_std,
            start_x: run[0].x,
            start_y: run[0].y,
            end_x: run[n - 1].x,
            end_y: run[n - 1].y,
            sample_range: range,
        }
    }
}

/// Splits a fully labeled series into events: one event per maximal run of
/// identically labeled samples. Events partition the sample indices and are
/// time-ordered.
pub fn segment_events(series: &GazeSeries) -> Result<Vec<GazeEvent>, GazeError> {
    if series.is_empty() {
        return Err(GazeError::TooShort { need: 1, got: 0 });
    }
    let samples = series.samples();
    if let Some(index) = samples.iter().position(|s| s.label == EventLabel::Unlabeled) {
        return Err(GazeError::UnlabeledSamples { index });
    }
    let labels: Vec<EventLabel> = samples.iter().map(|s| s.label).collect();
    Ok(label_runs(&labels)
        .into_iter()
        .map(|(_, start, end)| GazeEvent::from_run(samples, start..end + 1))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(samples: Vec<GazeSample>, rate: f64) -> GazeSeries {
        GazeSeries::new(samples, rate, "s", "i").unwrap()
    }

    fn fix(x: f64, y: f64, t: f64) -> GazeSample {
        GazeSample::new(x, y, t, EventLabel::Fixation)
    }

    fn unl(x: f64, y: f64, t: f64) -> GazeSample {
        GazeSample::new(x, y, t, EventLabel::Unlabeled)
    }

    #[test]
    fn velocity_of_first_sample_is_zero() {
        let s = series(vec![unl(0.0, 90.0, 0.0), unl(1.0, 90.0, 10.0)], 100.0);
        let v = sample_velocity(&s).unwrap();
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn one_degree_in_ten_ms_is_one_hundred_deg_per_s() {
        let s = series(vec![unl(0.0, 90.0, 0.0), unl(1.0, 90.0, 10.0)], 100.0);
        let v = sample_velocity(&s).unwrap();
        assert!((v[1] - 100.0).abs() < 1e-9, "v = {}", v[1]);
    }

    #[test]
    fn velocity_handles_irregular_gaps() {
        // Same 1-degree step but over 40 ms -> 25 deg/s.
        let s = series(vec![unl(0.0, 90.0, 0.0), unl(1.0, 90.0, 40.0)], 100.0);
        let v = sample_velocity(&s).unwrap();
        assert!((v[1] - 25.0).abs() < 1e-9);
    }

    /// Builds the classic step stimulus: stationary, fast traverse, stationary.
    fn step_series() -> GazeSeries {
        let dt = 1000.0 / 120.0;
        let mut samples = Vec::new();
        let mut t = 0.0;
        for _ in 0..30 {
            samples.push(unl(50.0, 90.0, t));
            t += dt;
        }
        // 10-degree traverse at ~480 deg/s: 4 degrees per 120 Hz step.
        for step in [54.0, 58.0, 60.0] {
            samples.push(unl(step, 90.0, t));
            t += dt;
        }
        for _ in 0..30 {
            samples.push(unl(60.0, 90.0, t));
            t += dt;
        }
        series(samples, 120.0)
    }

    #[test]
    fn step_detects_fixation_saccade_fixation() {
        let labeled = detect_events_ivt(&step_series(), &IvtParams::default()).unwrap();
        let events = segment_events(&labeled).unwrap();
        let kinds: Vec<EventLabel> = events.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![EventLabel::Fixation, EventLabel::Saccade, EventLabel::Fixation],
            "events: {events:#?}"
        );
    }

    #[test]
    fn constant_position_is_one_fixation() {
        let dt = 1000.0 / 120.0;
        let samples: Vec<GazeSample> =
            (0..120).map(|i| unl(42.0, 77.0, i as f64 * dt)).collect();
        let labeled = detect_events_ivt(&series(samples, 120.0), &IvtParams::default()).unwrap();
        let events = segment_events(&labeled).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, EventLabel::Fixation);
        assert_eq!(events[0].mean_velocity, 0.0);
        assert_eq!(events[0].peak_velocity, 0.0);
    }

    #[test]
    fn velocity_exactly_at_threshold_is_fixation() {
        // Steady motion; threshold set to the realized velocity so the
        // strict-inequality rule decides.
        let mut samples = Vec::new();
        for i in 0..40 {
            samples.push(unl(10.0 + 0.5 * i as f64, 90.0, i as f64 * 10.0));
        }
        let s = series(samples, 100.0);
        let v = sample_velocity(&s).unwrap();
        // Realized velocities differ only in the last float bits; put the
        // threshold exactly at the largest so the strict > rule decides.
        let vmax = v.iter().cloned().fold(0.0, f64::max);
        let params = IvtParams { velocity_threshold: vmax, ..IvtParams::default() };
        let labeled = detect_events_ivt(&s, &params).unwrap();
        assert!(labeled.samples().iter().all(|smp| smp.label == EventLabel::Fixation));
    }

    #[test]
    fn jitter_blip_merges_into_fixation() {
        let dt = 1000.0 / 120.0;
        let mut samples = Vec::new();
        let mut t = 0.0;
        for _ in 0..30 {
            samples.push(unl(50.0, 90.0, t));
            t += dt;
        }
        // One-sample out-and-back twitch: fast, but lands where it started.
        samples.push(unl(51.5, 90.0, t));
        t += dt;
        for _ in 0..30 {
            samples.push(unl(50.0, 90.0, t));
            t += dt;
        }
        let labeled = detect_events_ivt(&series(samples, 120.0), &IvtParams::default()).unwrap();
        let events = segment_events(&labeled).unwrap();
        assert_eq!(events.len(), 1, "blip should merge: {events:#?}");
        assert_eq!(events[0].kind, EventLabel::Fixation);
    }

    #[test]
    fn sustained_fast_motion_becomes_smooth_pursuit() {
        // 200 deg/s for 400 ms: far above threshold, far too long for a saccade.
        let dt = 1000.0 / 120.0;
        let mut samples = Vec::new();
        let mut t = 0.0;
        for _ in 0..24 {
            samples.push(unl(50.0, 90.0, t));
            t += dt;
        }
        let mut x = 50.0;
        for _ in 0..48 {
            x += 200.0 * dt / 1000.0;
            samples.push(unl(x, 90.0, t));
            t += dt;
        }
        for _ in 0..24 {
            samples.push(unl(x, 90.0, t));
            t += dt;
        }
        let labeled = detect_events_ivt(&series(samples, 120.0), &IvtParams::default()).unwrap();
        let events = segment_events(&labeled).unwrap();
        assert!(
            events.iter().any(|e| e.kind == EventLabel::SmoothPursuit),
            "expected a pursuit event: {events:#?}"
        );
        assert!(!events.iter().any(|e| e.kind == EventLabel::Saccade));
    }

    #[test]
    fn detector_is_idempotent() {
        let params = IvtParams::default();
        let once = detect_events_ivt(&step_series(), &params).unwrap();
        let twice = detect_events_ivt(&once, &params).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn detector_rejects_bad_params() {
        let bad = IvtParams { velocity_threshold: 0.0, ..IvtParams::default() };
        assert!(matches!(
            detect_events_ivt(&step_series(), &bad),
            Err(GazeError::InvalidParams { .. })
        ));
    }

    #[test]
    fn segment_requires_labels() {
        let s = series(vec![fix(0.0, 90.0, 0.0), unl(0.0, 90.0, 10.0)], 100.0);
        assert!(matches!(segment_events(&s), Err(GazeError::UnlabeledSamples { index: 1 })));
    }

    #[test]
    fn single_run_spans_first_to_last_timestamp() {
        let samples: Vec<GazeSample> = (0..10).map(|i| fix(5.0, 90.0, i as f64 * 8.0)).collect();
        let events = segment_events(&series(samples, 125.0)).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].start_ms, 0.0);
        assert_eq!(events[0].end_ms, 72.0);
        assert_eq!(events[0].duration_ms, 72.0);
        assert_eq!(events[0].sample_range, 0..10);
    }

    #[test]
    fn events_partition_the_series() {
        let labeled = detect_events_ivt(&step_series(), &IvtParams::default()).unwrap();
        let events = segment_events(&labeled).unwrap();
        let mut covered = 0;
        for e in &events {
            assert_eq!(e.sample_range.start, covered);
            covered = e.sample_range.end;
        }
        assert_eq!(covered, labeled.len());
        // Time-ordered and non-overlapping.
        for w in events.windows(2) {
            assert!(w[0].end_ms <= w[1].start_ms);
        }
    }

    #[test]
    fn centroid_is_duration_weighted() {
        // Two positions, each held for 200 ms.
        let samples = vec![
            fix(10.0, 90.0, 0.0),
            fix(10.0, 90.0, 100.0),
            fix(10.2, 90.0, 200.0),
            fix(10.2, 90.0, 300.0),
        ];
        let events = segment_events(&series(samples, 10.0)).unwrap();
        assert_eq!(events.len(), 1);
        assert!((events[0].centroid_x - 10.1).abs() < 1e-12);
        assert!((events[0].centroid_y - 90.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_event_has_zero_velocities_and_dispersion() {
        let samples: Vec<GazeSample> = (0..25).map(|i| fix(10.0, 90.0, i as f64 * 8.0)).collect();
        let events = segment_events(&series(samples, 125.0)).unwrap();
        let e = &events[0];
        assert_eq!(e.mean_velocity, 0.0);
        assert_eq!(e.peak_velocity, 0.0);
        assert_eq!(e.velocity_std, 0.0);
        assert!(e.dispersion_deg < 1e-12);
        assert!(e.amplitude_deg < 1e-12);
    }

    #[test]
    fn peak_velocity_bounds_mean_velocity() {
        let labeled = detect_events_ivt(&step_series(), &IvtParams::default()).unwrap();
        for e in segment_events(&labeled).unwrap() {
            assert!(e.peak_velocity >= e.mean_velocity);
            assert!(e.mean_velocity >= 0.0);
        }
    }

    #[test]
    fn saccade_amplitude_is_first_to_last_distance() {
        let labeled = detect_events_ivt(&step_series(), &IvtParams::default()).unwrap();
        let events = segment_events(&labeled).unwrap();
        let saccade = events.iter().find(|e| e.kind == EventLabel::Saccade).unwrap();
        // The saccade run covers the moving samples; its amplitude is the
        // distance between its own endpoints, somewhere within the step.
        assert!(saccade.amplitude_deg > 3.0 && saccade.amplitude_deg <= 10.0 + 1e-9);
    }

    #[test]
    fn direction_uses_east_zero_convention() {
        let mk = |x0: f64, y0: f64, x1: f64, y1: f64| {
            let samples = vec![
                GazeSample::new(x0, y0, 0.0, EventLabel::Saccade),
                GazeSample::new(x1, y1, 10.0, EventLabel::Saccade),
            ];
            segment_events(&series(samples, 100.0)).unwrap()[0].direction_deg()
        };
        assert!((mk(10.0, 90.0, 12.0, 90.0) - 0.0).abs() < 1e-9, "east");
        assert!((mk(10.0, 90.0, 10.0, 88.0) - 90.0).abs() < 1e-9, "north");
        assert!((mk(10.0, 90.0, 8.0, 90.0) - 180.0).abs() < 1e-9, "west");
        assert!((mk(10.0, 90.0, 10.0, 92.0) - 270.0).abs() < 1e-9, "south");
        // Wraps the seam: 359 -> 1 is eastward.
        assert!((mk(359.0, 90.0, 1.0, 90.0) - 0.0).abs() < 1e-9, "east across seam");
    }
}
