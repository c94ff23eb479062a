//! Newline-delimited JSON protocol over which sessions are driven
//! remotely.
//!
//! Every request is one line: `{"op": ..., "args": {...}, "req_id": N}`.
//! Every request gets exactly one response line echoing `req_id`, either
//! `{"req_id":N,"ok":{...}}` or `{"req_id":N,"err":{"code":...,"msg":...}}`,
//! and a clock advancement is followed by the push frames it released
//! (`{"sample":{...}}` / `{"event":{...}}`), ascending in trigger time
//! with samples before event notices on ties. Responses are emitted with a
//! fixed field order and all quantities carry at least six significant
//! digits, so a scripted exchange is reproducible byte for byte. A
//! malformed line produces a `BAD_REQUEST` error and leaves the
//! connection usable.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;

use super::server::ReplaySource;
use super::session::{AdvanceOutcome, FixationSummary, SaccadeSummary, Session, StreamSample};
use super::{
    kind_wire_name, GatekeeperError, GazeEventNotice, SampleStreamPolicy, SessionPolicy,
    StreamMechanism, Tiling,
};
use crate::evaluation::Aoi;
use crate::privacy::MechanismConfig;

/// Formats a finite quantity as plain decimal with at least six
/// significant digits (more decimals are added for magnitudes below 0.1).
pub fn fmt_number(v: f64) -> String {
    if v == 0.0 {
        return "0.000000".to_string();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (5 - exponent).max(6) as usize;
    format!("{v:.decimals$}")
}

/// Escapes a string for embedding in a JSON document.
fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                out.push_str(&format!("\\u{:04x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out
}

fn req_id_json(req_id: &Option<Value>) -> String {
    match req_id {
        None => "null".to_string(),
        Some(v) => serde_json::to_string(v).unwrap_or_else(|_| "null".to_string()),
    }
}

fn ok_frame(req_id: &Option<Value>, payload: &str) -> String {
    format!("{{\"req_id\":{},\"ok\":{payload}}}", req_id_json(req_id))
}

fn err_frame(req_id: &Option<Value>, code: &str, msg: &str) -> String {
    format!(
        "{{\"req_id\":{},\"err\":{{\"code\":\"{code}\",\"msg\":\"{}\"}}}}",
        req_id_json(req_id),
        json_escape(msg)
    )
}

fn sample_frame(s: &StreamSample) -> String {
    format!(
        "{{\"sample\":{{\"x\":{},\"y\":{},\"t\":{}}}}}",
        fmt_number(s.x),
        fmt_number(s.y),
        fmt_number(s.t_ms)
    )
}

fn event_frame(n: &GazeEventNotice) -> String {
    format!(
        "{{\"event\":{{\"event_id\":{},\"kind\":\"{}\",\"phase\":\"{}\",\"x\":{},\"y\":{},\"t_ms\":{}}}}}",
        n.event_id,
        kind_wire_name(n.kind),
        n.phase.as_str(),
        fmt_number(n.x),
        fmt_number(n.y),
        fmt_number(n.t_ms)
    )
}

fn fixation_json(f: &FixationSummary) -> String {
    format!(
        "{{\"event_id\":{},\"x\":{},\"y\":{},\"start_ms\":{},\"duration_ms\":{}}}",
        f.event_id,
        fmt_number(f.x),
        fmt_number(f.y),
        fmt_number(f.start_ms),
        fmt_number(f.duration_ms)
    )
}

fn saccade_json(s: &SaccadeSummary) -> String {
    format!(
        "{{\"event_id\":{},\"x\":{},\"y\":{},\"start_ms\":{},\"duration_ms\":{},\"amplitude_deg\":{}}}",
        s.event_id,
        fmt_number(s.x),
        fmt_number(s.y),
        fmt_number(s.start_ms),
        fmt_number(s.duration_ms),
        fmt_number(s.amplitude_deg)
    )
}

/// Push frames for one clock advancement: ascending trigger time, samples
/// before event notices when they tie.
fn merge_pushes(outcome: &AdvanceOutcome) -> Vec<String> {
    let samples = &outcome.samples;
    let notices = &outcome.notices;
    let mut frames = Vec::with_capacity(samples.len() + notices.len());
    let (mut i, mut j) = (0, 0);
    while i < samples.len() || j < notices.len() {
        let take_sample = match (samples.get(i), notices.get(j)) {
            (Some(s), Some(n)) => s.t_ms <= n.t_ms,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if take_sample {
            frames.push(sample_frame(&samples[i]));
            i += 1;
        } else {
            frames.push(event_frame(&notices[j]));
            j += 1;
        }
    }
    frames
}

#[derive(Deserialize)]
struct RequestEnvelope {
    #[serde(default)]
    op: Option<String>,
    #[serde(default)]
    args: Value,
    #[serde(default)]
    req_id: Option<Value>,
}

#[derive(Deserialize)]
struct OpenArgs {
    #[serde(default)]
    subject: Option<String>,
    #[serde(default)]
    stimulus: Option<String>,
    #[serde(default)]
    policy: Option<PolicyArgs>,
}

#[derive(Deserialize)]
struct PolicyArgs {
    #[serde(default)]
    allow_aoi_queries: Option<bool>,
    #[serde(default)]
    allow_event_stream: Option<bool>,
    #[serde(default)]
    saccade_phase_events: Option<bool>,
    #[serde(default)]
    allow_tile_query: Option<bool>,
    #[serde(default)]
    tiling: Option<TilingArgs>,
    /// `"disabled"` or a mechanism in canonical string form.
    #[serde(default)]
    sample_mechanism: Option<String>,
}

#[derive(Deserialize)]
struct TilingArgs {
    rows: u32,
    cols: u32,
}

#[derive(Deserialize)]
struct AdvanceArgs {
    #[serde(default)]
    to_ms: Option<f64>,
    #[serde(default)]
    by_ms: Option<f64>,
}

#[derive(Deserialize)]
struct AoiArgs {
    aoi: AoiSpec,
}

#[derive(Deserialize)]
struct AoiSpec {
    #[serde(default)]
    id: Option<String>,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl AoiSpec {
    fn into_aoi(self) -> Aoi {
        Aoi {
            id: self.id.unwrap_or_else(|| "aoi".to_string()),
            x_min: self.x_min,
            x_max: self.x_max,
            y_min: self.y_min,
            y_max: self.y_max,
        }
    }
}

#[derive(Deserialize)]
struct DwellArgs {
    fixation_id: u64,
}

fn parse_args<T: serde::de::DeserializeOwned>(args: &Value) -> Result<T, GatekeeperError> {
    let value = if args.is_null() { Value::Object(Default::default()) } else { args.clone() };
    serde_json::from_value(value).map_err(|e| GatekeeperError::BadRequest {
        reason: format!("invalid args: {e}"),
    })
}

/// Overlays explicitly provided policy fields onto `base`; unlisted
/// fields inherit from it.
fn overlay_policy(base: SessionPolicy, args: PolicyArgs) -> Result<SessionPolicy, GatekeeperError> {
    let mut p = base;
    if let Some(v) = args.allow_aoi_queries {
        p.allow_aoi_queries = v;
    }
    if let Some(v) = args.allow_event_stream {
        p.allow_event_stream = v;
    }
    if let Some(v) = args.saccade_phase_events {
        p.saccade_phase_events = v;
    }
    if let Some(v) = args.allow_tile_query {
        p.allow_tile_query = v;
    }
    if let Some(t) = args.tiling {
        p.tiling = Tiling::new(t.rows, t.cols)?;
    }
    if let Some(m) = args.sample_mechanism {
        p.sample_stream = if m == "disabled" {
            SampleStreamPolicy::Disabled
        } else {
            let config: MechanismConfig = m.parse().map_err(|e| GatekeeperError::BadRequest {
                reason: format!("invalid sample mechanism '{m}': {e}"),
            })?;
            SampleStreamPolicy::Enabled(StreamMechanism::new(config)?)
        };
    }
    Ok(p)
}

/// Builds a policy from the same JSON object the wire protocol accepts in
/// `open_session` (`allow_aoi_queries`, `allow_event_stream`,
/// `saccade_phase_events`, `allow_tile_query`, `tiling: {rows, cols}`,
/// `sample_mechanism: "disabled" | canonical mechanism`), overlaid on
/// `base`.
pub fn policy_from_json(base: SessionPolicy, json: &str) -> Result<SessionPolicy, GatekeeperError> {
    let args: PolicyArgs =
        serde_json::from_str(json).map_err(|e| GatekeeperError::InvalidPolicy {
            reason: format!("invalid policy JSON: {e}"),
        })?;
    overlay_policy(base, args)
}

/// The frames produced by one request line, in emission order, and
/// whether the connection should close afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineOutcome {
    pub frames: Vec<String>,
    pub close: bool,
}

struct Reply {
    payload: String,
    pushes: Vec<String>,
    close: bool,
}

impl Reply {
    fn plain(payload: impl Into<String>) -> Self {
        Reply { payload: payload.into(), pushes: Vec::new(), close: false }
    }
}

/// Protocol state for one connection: at most one open session, plus the
/// shared catalog, default policy, and server-wide session id counter.
pub struct WireSession {
    source: Arc<ReplaySource>,
    default_policy: SessionPolicy,
    session_ids: Arc<AtomicU64>,
    session: Option<Session>,
}

impl WireSession {
    pub fn new(
        source: Arc<ReplaySource>,
        default_policy: SessionPolicy,
        session_ids: Arc<AtomicU64>,
    ) -> Self {
        WireSession { source, default_policy, session_ids, session: None }
    }

    /// Processes one request line. Blank lines produce no frames; any
    /// parse failure produces a single `BAD_REQUEST` error frame and
    /// keeps the connection open.
    pub fn handle_line(&mut self, line: &str) -> LineOutcome {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            return LineOutcome { frames: Vec::new(), close: false };
        }
        let envelope: RequestEnvelope = match serde_json::from_str(trimmed) {
            Ok(env) => env,
            Err(e) => {
                return LineOutcome {
                    frames: vec![err_frame(
                        &None,
                        "BAD_REQUEST",
                        &format!("malformed request: {e}"),
                    )],
                    close: false,
                };
            }
        };
        let req_id = envelope.req_id.clone();
        match self.dispatch(&envelope) {
            Ok(reply) => {
                let mut frames = Vec::with_capacity(1 + reply.pushes.len());
                frames.push(ok_frame(&req_id, &reply.payload));
                frames.extend(reply.pushes);
                LineOutcome { frames, close: reply.close }
            }
            Err(e) => LineOutcome {
                frames: vec![err_frame(&req_id, e.code(), &e.to_string())],
                close: false,
            },
        }
    }

    fn dispatch(&mut self, envelope: &RequestEnvelope) -> Result<Reply, GatekeeperError> {
        let op = envelope.op.as_deref().ok_or_else(|| GatekeeperError::BadRequest {
            reason: "missing op".to_string(),
        })?;
        match op {
            "open_session" => self.op_open_session(&envelope.args),
            "advance_clock" => self.op_advance_clock(&envelope.args),
            "get_fixations" => self.op_get_fixations(&envelope.args),
            "get_dwell_time" => self.op_get_dwell_time(&envelope.args),
            "get_saccades" => self.op_get_saccades(&envelope.args),
            "subscribe_events" => {
                self.session_mut()?.subscribe_events()?;
                Ok(Reply::plain("{\"subscribed\":true}"))
            }
            "stream_samples" => {
                self.session_mut()?.stream_samples()?;
                Ok(Reply::plain("{\"streaming\":true}"))
            }
            "get_current_tile" => {
                let (row, col) = self.session_ref()?.get_current_tile()?;
                Ok(Reply::plain(format!("{{\"row\":{row},\"col\":{col}}}")))
            }
            "close" => {
                self.session = None;
                Ok(Reply { payload: "{\"closed\":true}".to_string(), pushes: Vec::new(), close: true })
            }
            other => Err(GatekeeperError::BadRequest {
                reason: format!("unknown op '{other}'"),
            }),
        }
    }

    fn session_mut(&mut self) -> Result<&mut Session, GatekeeperError> {
        self.session.as_mut().ok_or_else(|| GatekeeperError::BadRequest {
            reason: "no open session on this connection".to_string(),
        })
    }

    fn session_ref(&self) -> Result<&Session, GatekeeperError> {
        self.session.as_ref().ok_or_else(|| GatekeeperError::BadRequest {
            reason: "no open session on this connection".to_string(),
        })
    }

    fn op_open_session(&mut self, args: &Value) -> Result<Reply, GatekeeperError> {
        if self.session.is_some() {
            return Err(GatekeeperError::BadRequest {
                reason: "a session is already open on this connection".to_string(),
            });
        }
        let open: OpenArgs = parse_args(args)?;
        let series = self.source.resolve(open.subject.as_deref(), open.stimulus.as_deref())?;
        let policy = match open.policy {
            None => self.default_policy,
            Some(requested) => {
                let requested = overlay_policy(self.default_policy, requested)?;
                self.default_policy.narrow(&requested)?
            }
        };
        let id = format!("s{}", self.session_ids.fetch_add(1, Ordering::Relaxed) + 1);
        let session = Session::new(id, Arc::clone(&series), policy)?;
        let payload = format!(
            "{{\"session_id\":\"{}\",\"subject\":\"{}\",\"stimulus\":\"{}\",\"samples\":{},\"events\":{},\"rate_hz\":{}}}",
            json_escape(session.id()),
            json_escape(series.subject_id()),
            json_escape(series.stimulus_id()),
            series.len(),
            session.event_count(),
            fmt_number(series.sampling_rate_hz())
        );
        self.session = Some(session);
        Ok(Reply::plain(payload))
    }

    fn op_advance_clock(&mut self, args: &Value) -> Result<Reply, GatekeeperError> {
        let advance: AdvanceArgs = parse_args(args)?;
        let session = self.session_mut()?;
        let outcome = match (advance.to_ms, advance.by_ms) {
            (Some(to), None) => session.advance_clock(to)?,
            (None, Some(by)) => session.advance_by(by)?,
            _ => {
                return Err(GatekeeperError::BadRequest {
                    reason: "advance_clock takes exactly one of to_ms or by_ms".to_string(),
                })
            }
        };
        let payload = format!(
            "{{\"clock_ms\":{},\"events\":{},\"samples\":{}}}",
            fmt_number(outcome.clock_ms),
            outcome.notices.len(),
            outcome.samples.len()
        );
        Ok(Reply { payload, pushes: merge_pushes(&outcome), close: false })
    }

    fn op_get_fixations(&mut self, args: &Value) -> Result<Reply, GatekeeperError> {
        let aoi_args: AoiArgs = parse_args(args)?;
        let aoi = aoi_args.aoi.into_aoi();
        let fixations = self.session_mut()?.get_fixations(&aoi)?;
        let items: Vec<String> = fixations.iter().map(fixation_json).collect();
        Ok(Reply::plain(format!("{{\"fixations\":[{}]}}", items.join(","))))
    }

    fn op_get_dwell_time(&mut self, args: &Value) -> Result<Reply, GatekeeperError> {
        let dwell: DwellArgs = parse_args(args)?;
        let ms = self.session_ref()?.get_dwell_time(dwell.fixation_id)?;
        Ok(Reply::plain(format!("{{\"dwell_ms\":{}}}", fmt_number(ms))))
    }

    fn op_get_saccades(&mut self, args: &Value) -> Result<Reply, GatekeeperError> {
        let aoi_args: AoiArgs = parse_args(args)?;
        let aoi = aoi_args.aoi.into_aoi();
        let saccades = self.session_ref()?.get_saccades(&aoi)?;
        let items: Vec<String> = saccades.iter().map(saccade_json).collect();
        Ok(Reply::plain(format!("{{\"saccades\":[{}]}}", items.join(","))))
    }
}
