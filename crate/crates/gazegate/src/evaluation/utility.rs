//! Utility metrics: how much analytic value survives a gaze-data
//! transformation. Covers AOI dwell-time RMSE, saliency-map construction
//! and KL divergence, and short-horizon gaze prediction error.

use super::{Aoi, EvalError, UtilityMetrics};
use crate::data_io::Dataset;
use crate::gaze::{
    angular_distance, detect_events_ivt, segment_events, wrap_azimuth, wrap_signed_delta,
    EventLabel, GazeEvent, GazePoint, GazeSeries, IvtParams, MAX_POLAR,
};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Default saliency cell edge, degrees (180x360 one-degree grid).
pub const DEFAULT_CELL_DEG: f64 = 1.0;
/// Default saliency smoothing kernel width, degrees.
pub const DEFAULT_SMOOTHING_SIGMA_DEG: f64 = 2.0;
/// Default additive regularizer for KL divergence.
pub const DEFAULT_KL_EPS: f64 = 1e-12;
/// Default gaze-prediction horizon, milliseconds.
pub const DEFAULT_PREDICTION_HORIZON_MS: f64 = 100.0;

/// Total time (milliseconds) the fixations dwelt inside the AOI.
///
/// Sums `duration_ms` over fixation events whose centroid lies in the AOI
/// (min edges inclusive, max edges exclusive). Non-fixation events are
/// ignored; an empty list yields 0.
pub fn dwell_time(fixations: &[GazeEvent], aoi: &Aoi) -> f64 {
    fixations
        .iter()
        .filter(|e| e.kind == EventLabel::Fixation && aoi.contains(e.centroid()))
        .map(|e| e.duration_ms)
        .sum()
}

/// Fixation events re-detected from a series, in time order.
fn detected_fixations(series: &GazeSeries) -> Result<Vec<GazeEvent>, EvalError> {
    let relabeled = detect_events_ivt(series, &IvtParams::default())
        .map_err(|e| EvalError::InvalidConfig { reason: e.to_string() })?;
    let events = segment_events(&relabeled)
        .map_err(|e| EvalError::InvalidConfig { reason: e.to_string() })?;
    Ok(events.into_iter().filter(|e| e.kind == EventLabel::Fixation).collect())
}

/// Root-mean-squared dwell-time error between two datasets, in seconds.
///
/// For every (subject, stimulus, AOI) triple, events are re-detected on
/// both sides and the per-AOI dwell times compared; the RMSE runs over all
/// triples. Both datasets must carry the same recordings and the same AOI
/// declarations. Errors with [`EvalError::Empty`] when no stimulus
/// declares an AOI.
pub fn dwell_rmse(original: &Dataset, transformed: &Dataset) -> Result<f64, EvalError> {
    let orig_keys: Vec<&(String, String)> = original.iter().map(|(k, _)| k).collect();
    let trans_keys: Vec<&(String, String)> = transformed.iter().map(|(k, _)| k).collect();
    if orig_keys != trans_keys {
        return Err(EvalError::IndexMismatch {
            reason: format!(
                "datasets carry different recordings ({} vs {})",
                orig_keys.len(),
                trans_keys.len()
            ),
        });
    }
    let mut aois_by_stimulus: BTreeMap<&str, &[Aoi]> = BTreeMap::new();
    for info in &original.stimuli {
        aois_by_stimulus.insert(&info.id, &info.aois);
    }
    for info in &transformed.stimuli {
        match aois_by_stimulus.get(info.id.as_str()) {
            Some(aois) if *aois == info.aois.as_slice() => {}
            _ => {
                return Err(EvalError::IndexMismatch {
                    reason: format!(
                        "stimulus '{}' declares different AOIs in the two datasets",
                        info.id
                    ),
                })
            }
        }
    }

    // Squared errors per recording, computed in parallel in key order.
    let pairs: Vec<Result<Vec<f64>, EvalError>> = original
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(key, orig_series)| {
            let aois = aois_by_stimulus.get(key.1.as_str()).copied().unwrap_or(&[]);
            if aois.is_empty() {
                return Ok(Vec::new());
            }
            let trans_series = transformed.get(&key.0, &key.1).expect("key sets match");
            let orig_fix = detected_fixations(orig_series)?;
            let trans_fix = detected_fixations(trans_series)?;
            Ok(aois
                .iter()
                .map(|aoi| {
                    let d_orig = dwell_time(&orig_fix, aoi) / 1000.0;
                    let d_trans = dwell_time(&trans_fix, aoi) / 1000.0;
                    (d_orig - d_trans) * (d_orig - d_trans)
                })
                .collect())
        })
        .collect();

    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for result in pairs {
        for sq in result? {
            sum_sq += sq;
            count += 1;
        }
    }
    if count == 0 {
        return Err(EvalError::Empty { what: "dwell-time pairs (no stimulus declares an AOI)" });
    }
    Ok((sum_sq / count as f64).sqrt())
}

/// A probability distribution over the viewing sphere, discretized on an
/// equirectangular grid. Rows span the polar axis (rows x cell = 180°),
/// columns the azimuth (cols x cell = 360°); entries are nonnegative and
/// sum to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    grid: Vec<f64>,
    rows: usize,
    cols: usize,
    cell_deg: f64,
}

impl SaliencyMap {
    /// Wraps a row-major grid after validating the distribution invariants.
    pub fn from_grid(
        grid: Vec<f64>,
        rows: usize,
        cols: usize,
        cell_deg: f64,
    ) -> Result<Self, EvalError> {
        let invalid = |reason: String| EvalError::InvalidGrid { reason };
        if rows == 0 || cols == 0 || grid.len() != rows * cols {
            return Err(invalid(format!(
                "grid length {} does not match {rows}x{cols}",
                grid.len()
            )));
        }
        if !cell_deg.is_finite() || cell_deg <= 0.0 {
            return Err(invalid(format!("cell size must be positive, got {cell_deg}")));
        }
        if (rows as f64 * cell_deg - 180.0).abs() > 1e-9 {
            return Err(invalid(format!("{rows} rows of {cell_deg}° do not cover 180°")));
        }
        if (cols as f64 * cell_deg - 360.0).abs() > 1e-9 {
            return Err(invalid(format!("{cols} columns of {cell_deg}° do not cover 360°")));
        }
        let mut sum = 0.0;
        for &v in &grid {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(format!("grid entries must be nonnegative, found {v}")));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("grid mass must be 1 within 1e-9, got {sum}")));
        }
        Ok(SaliencyMap { grid, rows, cols, cell_deg })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_deg(&self) -> f64 {
        self.cell_deg
    }

    /// Row-major cell values.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.grid[row * self.cols + col]
    }

    pub fn sum(&self) -> f64 {
        self.grid.iter().sum()
    }
}

/// Normalized 1D Gaussian taps covering ±3 sigma (in cells).
fn gaussian_kernel(sigma_cells: f64) -> Vec<f64> {
    let radius = (3.0 * sigma_cells).ceil() as i64;
    let mut taps = Vec::with_capacity((2 * radius + 1) as usize);
    let mut sum = 0.0;
    for d in -radius..=radius {
        let t = (-(d as f64 * d as f64) / (2.0 * sigma_cells * sigma_cells)).exp();
        taps.push(t);
        sum += t;
    }
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Builds a saliency map from fixation events pooled across viewers.
///
/// Each fixation deposits its duration at its centroid's cell; the grid is
/// then smoothed with a separable Gaussian (the azimuth axis wraps, the
/// polar axis clamps mass into the edge rows) and normalized to sum 1.
/// `cell_deg` must divide both 180 and 360. Errors with
/// [`EvalError::EmptyInput`] when no fixation carries positive duration —
/// a uniform map is never silently substituted.
pub fn build_saliency_map(
    fixations: &[GazeEvent],
    cell_deg: f64,
    smoothing_sigma_deg: f64,
) -> Result<SaliencyMap, EvalError> {
    let invalid = |reason: String| EvalError::InvalidGrid { reason };
    if !cell_deg.is_finite() || cell_deg <= 0.0 {
        return Err(invalid(format!("cell size must be positive, got {cell_deg}")));
    }
    let rows_f = 180.0 / cell_deg;
    let cols_f = 360.0 / cell_deg;
    if (rows_f - rows_f.round()).abs() > 1e-9 || (cols_f - cols_f.round()).abs() > 1e-9 {
        return Err(invalid(format!("cell size {cell_deg}° must divide both 180° and 360°")));
    }
    if !smoothing_sigma_deg.is_finite() || smoothing_sigma_deg < 0.0 {
        return Err(invalid(format!(
            "smoothing sigma must be nonnegative, got {smoothing_sigma_deg}"
        )));
    }
    let rows = rows_f.round() as usize;
    let cols = cols_f.round() as usize;

    let mut grid = vec![0.0; rows * cols];
    let mut mass = 0.0;
    for event in fixations {
        if event.kind != EventLabel::Fixation || event.duration_ms <= 0.0 {
            continue;
        }
        let col = ((event.centroid_x / cell_deg) as usize).min(cols - 1);
        let row = ((event.centroid_y / cell_deg) as usize).min(rows - 1);
        grid[row * cols + col] += event.duration_ms;
        mass += event.duration_ms;
    }
    if mass <= 0.0 {
        return Err(EvalError::EmptyInput);
    }

    if smoothing_sigma_deg > 0.0 {
        let taps = gaussian_kernel(smoothing_sigma_deg / cell_deg);
        let radius = (taps.len() / 2) as i64;

        // Horizontal pass: azimuth wraps around.
        let mut blurred = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                let w = grid[r * cols + c];
                if w == 0.0 {
                    continue;
                }
                for (i, tap) in taps.iter().enumerate() {
                    let cc = (c as i64 + i as i64 - radius).rem_euclid(cols as i64) as usize;
                    blurred[r * cols + cc] += w * tap;
                }
            }
        }
        // Vertical pass: out-of-range taps deposit into the edge rows, so
        // no mass leaves the sphere.
        grid = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                let w = blurred[r * cols + c];
                if w == 0.0 {
                    continue;
                }
                for (i, tap) in taps.iter().enumerate() {
                    let rr = (r as i64 + i as i64 - radius).clamp(0, rows as i64 - 1) as usize;
                    grid[rr * cols + c] += w * tap;
                }
            }
        }
    }

    let total: f64 = grid.iter().sum();
    for v in &mut grid {
        *v /= total;
    }
    Ok(SaliencyMap { grid, rows, cols, cell_deg })
}

/// KL divergence (nats) from `p` to `q`: sum of p_i ln((p_i+eps)/(q_i+eps)).
pub fn kl_divergence(p: &SaliencyMap, q: &SaliencyMap, eps: f64) -> Result<f64, EvalError> {
    if p.rows != q.rows || p.cols != q.cols || p.cell_deg != q.cell_deg {
        return Err(EvalError::ShapeMismatch {
            p_rows: p.rows,
            p_cols: p.cols,
            p_cell: p.cell_deg,
            q_rows: q.rows,
            q_cols: q.cols,
            q_cell: q.cell_deg,
        });
    }
    Ok(p.grid
        .iter()
        .zip(&q.grid)
        .map(|(&pi, &qi)| if pi == 0.0 { 0.0 } else { pi * ((pi + eps) / (qi + eps)).ln() })
        .sum())
}

/// Constant-velocity gaze prediction, cross-validated within one series.
///
/// For every sample with a predecessor, extrapolates the inter-sample
/// velocity `horizon_ms` into the future (azimuth wraps, polar clamps) and
/// pairs the prediction with the recorded sample nearest the target time.
/// Targets farther than half a nominal sample period from any sample are
/// skipped. Returns (predicted, truth) pairs.
pub fn predict_gaze_cv(
    series: &GazeSeries,
    horizon_ms: f64,
) -> Result<Vec<(GazePoint, GazePoint)>, EvalError> {
    if !horizon_ms.is_finite() || horizon_ms <= 0.0 {
        return Err(EvalError::InvalidConfig {
            reason: format!("prediction horizon must be positive, got {horizon_ms}"),
        });
    }
    let samples = series.samples();
    if samples.len() < 3 {
        return Err(EvalError::TooShort { got: samples.len() });
    }
    let half_period = series.nominal_period_ms() / 2.0;
    let times: Vec<f64> = samples.iter().map(|s| s.t_ms).collect();

    let mut pairs = Vec::new();
    for i in 1..samples.len() {
        let dt = samples[i].t_ms - samples[i - 1].t_ms;
        let vx = wrap_signed_delta(samples[i].x - samples[i - 1].x) / dt;
        let vy = (samples[i].y - samples[i - 1].y) / dt;
        let predicted = GazePoint::new(
            wrap_azimuth(samples[i].x + vx * horizon_ms),
            (samples[i].y + vy * horizon_ms).clamp(0.0, MAX_POLAR),
        );
        let target = samples[i].t_ms + horizon_ms;
        let idx = match times.binary_search_by(|t| t.partial_cmp(&target).expect("finite time")) {
            Ok(exact) => exact,
            Err(insert) => {
                // Nearest of the two neighbors around the insertion point.
                let mut best = None;
                for cand in [insert.wrapping_sub(1), insert] {
                    if cand < times.len() {
                        let dist = (times[cand] - target).abs();
                        if best.map_or(true, |(_, d)| dist < d) {
                            best = Some((cand, dist));
                        }
                    }
                }
                match best {
                    Some((cand, _)) => cand,
                    None => continue,
                }
            }
        };
        if (times[idx] - target).abs() > half_period {
            continue;
        }
        pairs.push((predicted, samples[idx].point()));
    }
    Ok(pairs)
}

/// Mean angular error over (predicted, truth) pairs, in degrees.
pub fn prediction_error(pairs: &[(GazePoint, GazePoint)]) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty { what: "prediction pairs" });
    }
    let sum: f64 = pairs.iter().map(|(p, t)| angular_distance(*p, *t)).sum();
    Ok(sum / pairs.len() as f64)
}

/// Knobs for [`utility_metrics`]; the defaults match the documented
/// saliency grid (1° cells, 2° smoothing), KL regularizer, and 100 ms
/// prediction horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityParams {
    pub cell_deg: f64,
    pub smoothing_sigma_deg: f64,
    pub kl_eps: f64,
    pub horizon_ms: f64,
}

impl Default for UtilityParams {
    fn default() -> Self {
        UtilityParams {
            cell_deg: DEFAULT_CELL_DEG,
            smoothing_sigma_deg: DEFAULT_SMOOTHING_SIGMA_DEG,
            kl_eps: DEFAULT_KL_EPS,
            horizon_ms: DEFAULT_PREDICTION_HORIZON_MS,
        }
    }
}

/// All utility metrics between an original dataset and a transformed copy.
///
/// Dwell RMSE spans every declared AOI; KL divergence is computed per
/// stimulus between saliency maps pooled across subjects, then averaged;
/// prediction error is averaged over the transformed recordings. Metrics
/// whose inputs are absent come back `None` rather than failing.
pub fn utility_metrics(
    original: &Dataset,
    transformed: &Dataset,
    params: &UtilityParams,
) -> Result<UtilityMetrics, EvalError> {
    let dwell = match dwell_rmse(original, transformed) {
        Ok(v) => Some(v),
        Err(EvalError::Empty { .. }) => None,
        Err(e) => return Err(e),
    };

    // Per-stimulus saliency comparison, averaged over stimuli that have
    // usable fixations on both sides.
    let stimulus_ids: Vec<&str> = original.stimuli.iter().map(|s| s.id.as_str()).collect();
    let kls: Vec<Option<f64>> = stimulus_ids
        .par_iter()
        .map(|stim| -> Result<Option<f64>, EvalError> {
            let mut orig_fix = Vec::new();
            let mut trans_fix = Vec::new();
            for (key, series) in original.iter() {
                if key.1 == *stim {
                    orig_fix.extend(detected_fixations(series)?);
                }
            }
            for (key, series) in transformed.iter() {
                if key.1 == *stim {
                    trans_fix.extend(detected_fixations(series)?);
                }
            }
            let p = match build_saliency_map(&orig_fix, params.cell_deg, params.smoothing_sigma_deg)
            {
                Ok(map) => map,
                Err(EvalError::EmptyInput) => return Ok(None),
                Err(e) => return Err(e),
            };
            let q = match build_saliency_map(
                &trans_fix,
                params.cell_deg,
                params.smoothing_sigma_deg,
            ) {
                Ok(map) => map,
                Err(EvalError::EmptyInput) => return Ok(None),
                Err(e) => return Err(e),
            };
            Ok(Some(kl_divergence(&p, &q, params.kl_eps)?))
        })
        .collect::<Result<_, _>>()?;
    let kl_values: Vec<f64> = kls.into_iter().flatten().collect();
    let kl = if kl_values.is_empty() {
        None
    } else {
        Some(kl_values.iter().sum::<f64>() / kl_values.len() as f64)
    };

    // Prediction error on the transformed recordings.
    let errors: Vec<Option<f64>> = transformed
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(_, series)| -> Result<Option<f64>, EvalError> {
            let pairs = match predict_gaze_cv(series, params.horizon_ms) {
                Ok(pairs) => pairs,
                Err(EvalError::TooShort { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            match prediction_error(&pairs) {
                Ok(err) => Ok(Some(err)),
                Err(EvalError::Empty { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()?;
    let error_values: Vec<f64> = errors.into_iter().flatten().collect();
    let pred = if error_values.is_empty() {
        None
    } else {
        Some(error_values.iter().sum::<f64>() / error_values.len() as f64)
    };

    Ok(UtilityMetrics { dwell_rmse_s: dwell, kl_divergence: kl, prediction_error_deg: pred })
}
