//! Replay sessions: a recorded gaze series behind a virtual clock. Queries
//! and subscriptions only ever observe data at or before the clock, and the
//! answer to any request is a pure function of (source series, policy,
//! clock position), which makes replays byte-identical.

use std::collections::HashSet;
use std::sync::Arc;

use super::{
    EventPhase, GazeEventNotice, GatekeeperError, SampleStreamPolicy, SessionPolicy,
};
use crate::evaluation::Aoi;
use crate::gaze::{segment_events, EventLabel, GazeEvent, GazeSeries};
use crate::privacy::apply_mechanism;

/// A fixation as exposed to applications: centroid, onset, and duration.
/// No member samples, no trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixationSummary {
    pub event_id: u64,
    /// Centroid azimuth in degrees.
    pub x: f64,
    /// Centroid polar angle in degrees.
    pub y: f64,
    pub start_ms: f64,
    pub duration_ms: f64,
}

/// A saccade as exposed to applications: landing point, onset, duration,
/// and amplitude. The path between start and landing stays private.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaccadeSummary {
    pub event_id: u64,
    /// Landing azimuth in degrees.
    pub x: f64,
    /// Landing polar angle in degrees.
    pub y: f64,
    pub start_ms: f64,
    pub duration_ms: f64,
    pub amplitude_deg: f64,
}

/// One privacy-transformed sample released through an enabled stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamSample {
    pub x: f64,
    pub y: f64,
    pub t_ms: f64,
}

/// Everything released by one clock advancement, in delivery order within
/// each list (both are ascending in trigger time).
#[derive(Debug, Clone, PartialEq)]
pub struct AdvanceOutcome {
    pub clock_ms: f64,
    pub notices: Vec<GazeEventNotice>,
    pub samples: Vec<StreamSample>,
}

struct StreamState {
    samples: Vec<StreamSample>,
    cursor: usize,
}

/// One application's view of one recording, mediated by a policy.
///
/// The clock starts before all data (negative infinity) and only moves
/// forward via [`Session::advance_clock`]. Subscriptions and streams
/// deliver data whose trigger time is strictly after the clock at
/// activation — nothing is delivered retroactively.
pub struct Session {
    id: String,
    series: Arc<GazeSeries>,
    policy: SessionPolicy,
    events: Vec<GazeEvent>,
    /// Full notice schedule under this policy, ascending in trigger time.
    schedule: Vec<GazeEventNotice>,
    clock_ms: f64,
    /// Next schedule index to deliver; `None` until subscribed.
    notice_cursor: Option<usize>,
    stream: Option<StreamState>,
    /// Fixation ids already returned by `get_fixations`; only these may be
    /// passed to `get_dwell_time`.
    revealed_fixations: HashSet<u64>,
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        series: Arc<GazeSeries>,
        policy: SessionPolicy,
    ) -> Result<Self, GatekeeperError> {
        let events = segment_events(&series).map_err(|e| GatekeeperError::BadRequest {
            reason: format!("source series cannot be segmented: {e}"),
        })?;
        let schedule = build_schedule(&events, policy.saccade_phase_events);
        Ok(Session {
            id: id.into(),
            series,
            policy,
            events,
            schedule,
            clock_ms: f64::NEG_INFINITY,
            notice_cursor: None,
            stream: None,
            revealed_fixations: HashSet::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn policy(&self) -> &SessionPolicy {
        &self.policy
    }

    pub fn series(&self) -> &GazeSeries {
        &self.series
    }

    /// Current clock position; negative infinity before the first
    /// advancement.
    pub fn clock_ms(&self) -> f64 {
        self.clock_ms
    }

    /// Number of segmented events in the source (all kinds).
    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// Moves the clock forward to `to_ms` and returns whatever an active
    /// subscription or stream releases in `(old clock, to_ms]`. The clock
    /// never moves backwards.
    pub fn advance_clock(&mut self, to_ms: f64) -> Result<AdvanceOutcome, GatekeeperError> {
        if !to_ms.is_finite() {
            return Err(GatekeeperError::BadRequest {
                reason: format!("clock target must be finite, got {to_ms}"),
            });
        }
        if to_ms < self.clock_ms {
            return Err(GatekeeperError::BadRequest {
                reason: format!(
                    "clock may not move backwards (at {}, requested {to_ms})",
                    self.clock_ms
                ),
            });
        }
        self.clock_ms = to_ms;

        let mut notices = Vec::new();
        if let Some(cursor) = &mut self.notice_cursor {
            while *cursor < self.schedule.len() && self.schedule[*cursor].t_ms <= to_ms {
                notices.push(self.schedule[*cursor].clone());
                *cursor += 1;
            }
        }
        let mut samples = Vec::new();
        if let Some(stream) = &mut self.stream {
            while stream.cursor < stream.samples.len()
                && stream.samples[stream.cursor].t_ms <= to_ms
            {
                samples.push(stream.samples[stream.cursor]);
                stream.cursor += 1;
            }
        }
        Ok(AdvanceOutcome { clock_ms: to_ms, notices, samples })
    }

    /// Relative clock advancement: `by_ms` past the current clock, or past
    /// the first sample's timestamp when the clock has never been set (so
    /// `advance_by(0)` lands exactly on the first sample).
    pub fn advance_by(&mut self, by_ms: f64) -> Result<AdvanceOutcome, GatekeeperError> {
        if !by_ms.is_finite() || by_ms < 0.0 {
            return Err(GatekeeperError::BadRequest {
                reason: format!("clock step must be nonnegative and finite, got {by_ms}"),
            });
        }
        let base = if self.clock_ms.is_finite() {
            self.clock_ms
        } else {
            self.series.samples()[0].t_ms
        };
        self.advance_clock(base + by_ms)
    }

    /// Fixations completed at or before the clock whose centroid lies in
    /// `aoi`, in time order. Returned ids become valid arguments to
    /// [`Session::get_dwell_time`].
    pub fn get_fixations(
        &mut self,
        aoi: &Aoi,
    ) -> Result<Vec<FixationSummary>, GatekeeperError> {
        self.require_aoi_queries()?;
        validate_aoi(aoi)?;
        let mut out = Vec::new();
        for (i, ev) in self.events.iter().enumerate() {
            if ev.kind == EventLabel::Fixation
                && ev.end_ms <= self.clock_ms
                && aoi.contains(ev.centroid())
            {
                let event_id = i as u64;
                self.revealed_fixations.insert(event_id);
                out.push(FixationSummary {
                    event_id,
                    x: ev.centroid_x,
                    y: ev.centroid_y,
                    start_ms: ev.start_ms,
                    duration_ms: ev.duration_ms,
                });
            }
        }
        Ok(out)
    }

    /// Dwell time in milliseconds of a fixation previously returned by
    /// [`Session::get_fixations`] on this session.
    pub fn get_dwell_time(&self, fixation_id: u64) -> Result<f64, GatekeeperError> {
        self.require_aoi_queries()?;
        if !self.revealed_fixations.contains(&fixation_id) {
            return Err(GatekeeperError::UnknownFixation { id: fixation_id });
        }
        Ok(self.events[fixation_id as usize].duration_ms)
    }

    /// Saccades completed at or before the clock that landed in `aoi`, in
    /// time order. Summaries carry the landing point only, never the path.
    pub fn get_saccades(&self, aoi: &Aoi) -> Result<Vec<SaccadeSummary>, GatekeeperError> {
        self.require_aoi_queries()?;
        validate_aoi(aoi)?;
        let mut out = Vec::new();
        for (i, ev) in self.events.iter().enumerate() {
            if ev.kind == EventLabel::Saccade
                && ev.end_ms <= self.clock_ms
                && aoi.contains(ev.landing())
            {
                out.push(SaccadeSummary {
                    event_id: i as u64,
                    x: ev.end_x,
                    y: ev.end_y,
                    start_ms: ev.start_ms,
                    duration_ms: ev.duration_ms,
                    amplitude_deg: ev.amplitude_deg,
                });
            }
        }
        Ok(out)
    }

    /// Activates event notifications. Subsequent clock advancements
    /// deliver one completed notice per event — or started/ended pairs for
    /// saccades when the policy enables phase events — for triggers
    /// strictly after the current clock.
    pub fn subscribe_events(&mut self) -> Result<(), GatekeeperError> {
        if !self.policy.allow_event_stream {
            return Err(GatekeeperError::PolicyDenied { what: "event streaming" });
        }
        if self.notice_cursor.is_some() {
            return Err(GatekeeperError::BadRequest {
                reason: "events already subscribed on this session".into(),
            });
        }
        let start = self
            .schedule
            .partition_point(|notice| notice.t_ms <= self.clock_ms);
        self.notice_cursor = Some(start);
        Ok(())
    }

    /// Activates sample streaming through the policy's mechanism.
    /// Subsequent clock advancements deliver the transformed samples with
    /// timestamps strictly after the current clock.
    pub fn stream_samples(&mut self) -> Result<(), GatekeeperError> {
        let mechanism = match &self.policy.sample_stream {
            SampleStreamPolicy::Disabled => {
                return Err(GatekeeperError::PolicyDenied { what: "sample streaming" })
            }
            SampleStreamPolicy::Enabled(m) => *m.config(),
        };
        if self.stream.is_some() {
            return Err(GatekeeperError::BadRequest {
                reason: "samples already streaming on this session".into(),
            });
        }
        let transformed =
            apply_mechanism(&self.series, &mechanism).map_err(|e| GatekeeperError::BadRequest {
                reason: format!("stream mechanism failed: {e}"),
            })?;
        let samples: Vec<StreamSample> = transformed
            .samples()
            .iter()
            .map(|s| StreamSample { x: s.x, y: s.y, t_ms: s.t_ms })
            .collect();
        let cursor = samples.partition_point(|s| s.t_ms <= self.clock_ms);
        self.stream = Some(StreamState { samples, cursor });
        Ok(())
    }

    /// Grid cell of the most recent sample at or before the clock.
    pub fn get_current_tile(&self) -> Result<(u32, u32), GatekeeperError> {
        if !self.policy.allow_tile_query {
            return Err(GatekeeperError::PolicyDenied { what: "tile queries" });
        }
        let samples = self.series.samples();
        let idx = samples.partition_point(|s| s.t_ms <= self.clock_ms);
        if idx == 0 {
            return Err(GatekeeperError::NoData);
        }
        Ok(self.policy.tiling.tile_of(samples[idx - 1].point()))
    }

    fn require_aoi_queries(&self) -> Result<(), GatekeeperError> {
        if self.policy.allow_aoi_queries {
            Ok(())
        } else {
            Err(GatekeeperError::PolicyDenied { what: "AOI queries" })
        }
    }
}

fn validate_aoi(aoi: &Aoi) -> Result<(), GatekeeperError> {
    aoi.validate().map_err(|e| GatekeeperError::InvalidAoi { reason: e.to_string() })
}

/// Expands segmented events into the notice sequence a subscription would
/// deliver, ascending in trigger time. Unknown-labeled runs produce no
/// notices. With phase events a saccade contributes an onset notice at its
/// start (positioned where the eye was at onset) and a terminal ended
/// notice at its landing point; every other case is one completed notice
/// at the landing point.
fn build_schedule(events: &[GazeEvent], saccade_phases: bool) -> Vec<GazeEventNotice> {
    let mut schedule = Vec::new();
    for (i, ev) in events.iter().enumerate() {
        if ev.kind == EventLabel::Unlabeled {
            continue;
        }
        let event_id = i as u64;
        if saccade_phases && ev.kind == EventLabel::Saccade {
            schedule.push(GazeEventNotice {
                event_id,
                kind: ev.kind,
                x: ev.start_x,
                y: ev.start_y,
                t_ms: ev.start_ms,
                phase: EventPhase::SaccadeStarted,
            });
            schedule.push(GazeEventNotice {
                event_id,
                kind: ev.kind,
                x: ev.end_x,
                y: ev.end_y,
                t_ms: ev.end_ms,
                phase: EventPhase::SaccadeEnded,
            });
        } else {
            schedule.push(GazeEventNotice {
                event_id,
                kind: ev.kind,
                x: ev.end_x,
                y: ev.end_y,
                t_ms: ev.end_ms,
                phase: EventPhase::Completed,
            });
        }
    }
    // Events are disjoint in time and in order, so only a saccade's own
    // started/ended pair can tie; stable sort keeps started first.
    schedule.sort_by(|a, b| a.t_ms.total_cmp(&b.t_ms));
    schedule
}
