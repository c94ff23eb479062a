//! The per-recording CSV format.
//!
//! ```text
//! t_ms,x_deg,y_deg,event
//! 0,181.25,90,F
//! 8.333333333333334,181.2578125,90.01,F
//! ```
//!
//! One sample per row; `event` is one of `F`, `S`, `SP`, `U`. Reals use
//! `.` as the decimal separator and are written in shortest round-trip
//! decimal form, never exponent notation. Files are UTF-8 with LF line
//! endings and no trailing whitespace.

use std::path::Path;

use super::DataIoError;
use crate::gaze::{EventLabel, GazeSample, GazeSeries};

/// First line of every recording file.
pub const RECORDING_HEADER: &str = "t_ms,x_deg,y_deg,event";

/// Sampling rate assumed when a file is too short to infer one.
///
/// The CSV format carries no rate; [`read_recording`] infers it from the
/// median timestamp gap. With fewer than two samples there is no gap, and
/// this placeholder is used instead. Datasets always override it with the
/// manifest's `rate_hz`.
pub const FALLBACK_RATE_HZ: f64 = 1000.0;

/// Renders a series in the canonical CSV form.
fn format_recording(series: &GazeSeries) -> String {
    let mut out = String::with_capacity(32 * (series.len() + 1));
    out.push_str(RECORDING_HEADER);
    out.push('\n');
    for s in series.samples() {
        // `{}` on f64 is shortest-round-trip decimal notation, which keeps
        // the format bit-exact: parsing recovers the same f64, and
        // re-writing produces the same bytes.
        out.push_str(&format!("{},{},{},{}\n", s.t_ms, s.x, s.y, s.label.code()));
    }
    out
}

/// Writes `series` to `path` in the canonical CSV form. Writing the same
/// series twice produces byte-identical files.
pub fn write_recording(series: &GazeSeries, path: &Path) -> Result<(), DataIoError> {
    std::fs::write(path, format_recording(series))
        .map_err(|source| DataIoError::Io { path: path.to_path_buf(), source })
}

fn parse_field(
    field: &str,
    name: &str,
    path: &Path,
    line: usize,
) -> Result<f64, DataIoError> {
    field.parse::<f64>().map_err(|_| DataIoError::Parse {
        path: path.to_path_buf(),
        line,
        reason: format!("cannot parse {name} value '{field}' as a real number"),
    })
}

/// Parses the CSV text of one recording.
///
/// The returned series has empty subject and stimulus ids (the manifest
/// owns those) and a sampling rate inferred as `1000 / median gap in ms`,
/// or [`FALLBACK_RATE_HZ`] when fewer than two samples exist. Errors name
/// the offending 1-based file line.
fn parse_recording(text: &str, path: &Path) -> Result<GazeSeries, DataIoError> {
    if let Some(pos) = text.find('\r') {
        let line = text[..pos].matches('\n').count() + 1;
        return Err(DataIoError::Parse {
            path: path.to_path_buf(),
            line,
            reason: "carriage return found; recordings are LF-terminated".into(),
        });
    }
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RECORDING_HEADER => {}
        other => {
            return Err(DataIoError::Parse {
                path: path.to_path_buf(),
                line: 1,
                reason: format!(
                    "expected header '{RECORDING_HEADER}', found '{}'",
                    other.unwrap_or_default()
                ),
            })
        }
    }

    let mut samples: Vec<GazeSample> = Vec::new();
    for (i, row) in lines.enumerate() {
        let line = i + 2; // 1-based, after the header
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 4 {
            return Err(DataIoError::Parse {
                path: path.to_path_buf(),
                line,
                reason: format!("expected 4 comma-separated fields, found {}", fields.len()),
            });
        }
        let t_ms = parse_field(fields[0], "t_ms", path, line)?;
        let x = parse_field(fields[1], "x_deg", path, line)?;
        let y = parse_field(fields[2], "y_deg", path, line)?;
        let label = EventLabel::from_code(fields[3]).ok_or_else(|| DataIoError::Parse {
            path: path.to_path_buf(),
            line,
            reason: format!("unknown event label '{}' (expected F, S, SP, or U)", fields[3]),
        })?;
        let sample = GazeSample::new(x, y, t_ms, label);
        if let Some(reason) = sample.domain_error() {
            return Err(DataIoError::Domain { path: path.to_path_buf(), line, reason });
        }
        if let Some(prev) = samples.last() {
            if t_ms <= prev.t_ms {
                return Err(DataIoError::NonMonotoneTimestamps {
                    path: path.to_path_buf(),
                    line,
                });
            }
        }
        samples.push(sample);
    }

    let rate = inferred_rate(&samples);
    Ok(GazeSeries::new(samples, rate, "", "")?)
}

/// `1000 / median gap`: robust to dropout gaps, exact on regular grids.
fn inferred_rate(samples: &[GazeSample]) -> f64 {
    if samples.len() < 2 {
        return FALLBACK_RATE_HZ;
    }
    let mut gaps: Vec<f64> = samples.windows(2).map(|w| w[1].t_ms - w[0].t_ms).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).expect("monotone timestamps give finite gaps"));
    let mid = gaps.len() / 2;
    let median = if gaps.len() % 2 == 1 { gaps[mid] } else { (gaps[mid - 1] + gaps[mid]) / 2.0 };
    1000.0 / median
}

/// Reads one recording file. See [`write_recording`] for the format and
/// the module docs for what the returned series does and does not carry.
pub fn read_recording(path: &Path) -> Result<GazeSeries, DataIoError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DataIoError::Io { path: path.to_path_buf(), source })?;
    parse_recording(&text, path)
}
