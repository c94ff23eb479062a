//! The trusted intermediary between gaze data and applications. Instead of
//! raw sample streams, applications get AOI queries (fixation and saccade
//! summaries, dwell times), completed-event notifications, coarse tile
//! attention, and — when policy allows it at all — sample streams that have
//! passed through a privacy mechanism. Exposed both in-process ([`Session`])
//! and over a newline-delimited JSON TCP protocol ([`serve`]).

mod server;
mod session;
mod wire;

pub use server::{serve, GatekeeperServer, ReplaySource};
pub use session::{AdvanceOutcome, FixationSummary, SaccadeSummary, Session, StreamSample};
pub use wire::{fmt_number, policy_from_json, LineOutcome, WireSession};

use crate::gaze::{EventLabel, GazePoint};
use crate::privacy::{Mechanism, MechanismConfig};
use thiserror::Error;

/// Errors surfaced by sessions, policy negotiation, and the server.
#[derive(Debug, Error)]
pub enum GatekeeperError {
    #[error("policy denies {what}")]
    PolicyDenied { what: &'static str },
    #[error("fixation id {id} was not returned by a prior query on this session")]
    UnknownFixation { id: u64 },
    #[error("invalid AOI: {reason}")]
    InvalidAoi { reason: String },
    #[error("no gaze data at or before the session clock")]
    NoData,
    #[error("bad request: {reason}")]
    BadRequest { reason: String },
    #[error("invalid policy: {reason}")]
    InvalidPolicy { reason: String },
    #[error("failed to bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("replay source has no recordings")]
    SourceEmpty,
    #[error("no recording for subject '{subject}' on stimulus '{stimulus}'")]
    UnknownRecording { subject: String, stimulus: String },
}

impl GatekeeperError {
    /// Wire-protocol error code for this error.
    pub fn code(&self) -> &'static str {
        match self {
            GatekeeperError::PolicyDenied { .. } | GatekeeperError::InvalidPolicy { .. } => {
                "POLICY_DENIED"
            }
            GatekeeperError::UnknownFixation { .. } => "UNKNOWN_FIXATION",
            GatekeeperError::InvalidAoi { .. } => "INVALID_AOI",
            GatekeeperError::NoData | GatekeeperError::UnknownRecording { .. } => "NO_DATA",
            GatekeeperError::BadRequest { .. }
            | GatekeeperError::Bind { .. }
            | GatekeeperError::SourceEmpty => "BAD_REQUEST",
        }
    }
}

/// A discrete grid over the 360° x 180° viewing domain for coarse
/// attention queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tiling {
    rows: u32,
    cols: u32,
}

impl Tiling {
    pub fn new(rows: u32, cols: u32) -> Result<Self, GatekeeperError> {
        if rows == 0 || cols == 0 {
            return Err(GatekeeperError::InvalidPolicy {
                reason: format!("tiling must have positive dimensions, got {rows}x{cols}"),
            });
        }
        Ok(Tiling { rows, cols })
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    /// Tile containing a gaze point: `row = floor(y / (180/rows))`,
    /// `col = floor(x / (360/cols))`, clamped into range at the domain
    /// edges.
    pub fn tile_of(&self, point: GazePoint) -> (u32, u32) {
        let row = ((point.y / (180.0 / self.rows as f64)) as u32).min(self.rows - 1);
        let col = ((point.x / (360.0 / self.cols as f64)) as u32).min(self.cols - 1);
        (row, col)
    }
}

/// A privacy mechanism approved for sample streaming. The raw-identity
/// mechanism is rejected at construction, so a policy carrying this type
/// can never leak unmodified samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamMechanism(MechanismConfig);

impl StreamMechanism {
    pub fn new(config: MechanismConfig) -> Result<Self, GatekeeperError> {
        if matches!(config.mechanism, Mechanism::Identity) {
            return Err(GatekeeperError::InvalidPolicy {
                reason: "sample streaming with the identity mechanism would expose raw gaze \
                         samples"
                    .into(),
            });
        }
        Ok(StreamMechanism(config))
    }

    pub fn config(&self) -> &MechanismConfig {
        &self.0
    }
}

/// Whether (and how) a session may stream privacy-transformed samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleStreamPolicy {
    Disabled,
    Enabled(StreamMechanism),
}

/// Capabilities granted to a session. A client may narrow a policy
/// relative to the server default, never widen it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionPolicy {
    /// Fixation/saccade summary queries and dwell times.
    pub allow_aoi_queries: bool,
    /// Completed-event notifications.
    pub allow_event_stream: bool,
    /// When true, saccades additionally announce their onset
    /// (started/ended phases instead of one completed notice).
    pub saccade_phase_events: bool,
    /// Coarse current-tile attention queries.
    pub allow_tile_query: bool,
    /// Grid used by tile queries.
    pub tiling: Tiling,
    /// Privacy-transformed sample streaming.
    pub sample_stream: SampleStreamPolicy,
}

impl Default for SessionPolicy {
    /// Summaries, events, and a 4x4 tile grid allowed; saccade phases and
    /// sample streaming off.
    fn default() -> Self {
        SessionPolicy {
            allow_aoi_queries: true,
            allow_event_stream: true,
            saccade_phase_events: false,
            allow_tile_query: true,
            tiling: Tiling { rows: 4, cols: 4 },
            sample_stream: SampleStreamPolicy::Disabled,
        }
    }
}

impl SessionPolicy {
    /// Validates that `requested` only narrows this policy and returns it.
    ///
    /// Booleans may only turn capabilities off; a requested tiling may not
    /// exceed the default grid resolution on either axis; sample streaming
    /// may be disabled, or kept within the same mechanism family at equal
    /// or stronger privacy (larger sigma / K / L).
    pub fn narrow(&self, requested: &SessionPolicy) -> Result<SessionPolicy, GatekeeperError> {
        let widened = |what: &str| GatekeeperError::InvalidPolicy {
            reason: format!("requested policy widens {what} beyond the server default"),
        };
        if requested.allow_aoi_queries && !self.allow_aoi_queries {
            return Err(widened("AOI queries"));
        }
        if requested.allow_event_stream && !self.allow_event_stream {
            return Err(widened("event streaming"));
        }
        if requested.saccade_phase_events && !self.saccade_phase_events {
            return Err(widened("saccade phase events"));
        }
        if requested.allow_tile_query && !self.allow_tile_query {
            return Err(widened("tile queries"));
        }
        if requested.allow_tile_query
            && (requested.tiling.rows > self.tiling.rows
                || requested.tiling.cols > self.tiling.cols)
        {
            return Err(widened("tile resolution"));
        }
        match (&self.sample_stream, &requested.sample_stream) {
            (_, SampleStreamPolicy::Disabled) => {}
            (SampleStreamPolicy::Disabled, SampleStreamPolicy::Enabled(_)) => {
                return Err(widened("sample streaming"));
            }
            (SampleStreamPolicy::Enabled(def), SampleStreamPolicy::Enabled(req)) => {
                let ok = match (def.config().mechanism, req.config().mechanism) {
                    (Mechanism::Gaussian { sigma: d }, Mechanism::Gaussian { sigma: r }) => {
                        r >= d
                    }
                    (Mechanism::Temporal { k: d }, Mechanism::Temporal { k: r }) => r >= d,
                    (Mechanism::Spatial { l: d }, Mechanism::Spatial { l: r }) => r >= d,
                    _ => false,
                };
                if !ok {
                    return Err(widened("the sample-stream mechanism"));
                }
            }
        }
        Ok(*requested)
    }
}

/// Delivery phase of an event notice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventPhase {
    /// The event finished; this is the only notice it will produce.
    Completed,
    /// A saccade began (phase mode only); a SaccadeEnded with the same
    /// event_id follows.
    SaccadeStarted,
    /// The saccade finished (phase mode only); terminal for its event_id.
    SaccadeEnded,
}

impl EventPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventPhase::Completed => "completed",
            EventPhase::SaccadeStarted => "saccade_started",
            EventPhase::SaccadeEnded => "saccade_ended",
        }
    }
}

/// One event notification: where the event (so far) landed and when.
/// Carries no trajectory and no per-sample data.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeEventNotice {
    pub event_id: u64,
    /// Fixation, saccade, or smooth pursuit.
    pub kind: EventLabel,
    /// Landing point: the event's last position (its current position at
    /// onset for SaccadeStarted).
    pub x: f64,
    pub y: f64,
    /// Trigger time: event end, or onset for SaccadeStarted.
    pub t_ms: f64,
    pub phase: EventPhase,
}

/// Wire name for an event kind.
pub(crate) fn kind_wire_name(kind: EventLabel) -> &'static str {
    match kind {
        EventLabel::Fixation => "fixation",
        EventLabel::Saccade => "saccade",
        EventLabel::SmoothPursuit => "smooth_pursuit",
        EventLabel::Unlabeled => "unlabeled",
    }
}
