//! Re-identification risk measurement: split stimuli into train/test,
//! transform both sides, train the fixation/saccade classifier pair on the
//! training half, and score how often test streams are attributed to the
//! right subject.

use super::{EvalConfig, EvalError, EvalReport, RunSummary};
use crate::biometric::{
    build_network, classify_stream, extract_features, EventClass, FeatureVector, RbfNetwork,
};
use crate::data_io::Dataset;
use crate::gaze::{detect_events_ivt, segment_events, EventLabel, GazeSeries, IvtParams};
use crate::privacy::{apply_mechanism, MechanismConfig};
use crate::seeding::mix_seed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Splits stimulus ids into disjoint train and test sets, deterministically
/// for a given seed.
///
/// The train set holds `round(train_fraction * count)` stimuli, clamped to
/// `[1, count - 1]` so neither side is ever empty. Selection is a seeded
/// shuffle; both returned sets are sorted.
pub fn split_stimuli(
    stimulus_ids: &[String],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), EvalError> {
    if stimulus_ids.len() < 2 {
        return Err(EvalError::TooFewStimuli { got: stimulus_ids.len() });
    }
    if !train_fraction.is_finite() {
        return Err(EvalError::InvalidConfig {
            reason: format!("train_fraction must be finite, got {train_fraction}"),
        });
    }
    let count = stimulus_ids.len();
    let train_size =
        ((train_fraction * count as f64).round() as i64).clamp(1, count as i64 - 1) as usize;

    let mut order: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut train: Vec<String> =
        order[..train_size].iter().map(|&i| stimulus_ids[i].clone()).collect();
    let mut test: Vec<String> =
        order[train_size..].iter().map(|&i| stimulus_ids[i].clone()).collect();
    train.sort();
    test.sort();
    Ok((train, test))
}

/// Fraction of correct attributions over (predicted, truth) pairs.
pub fn identification_rate(predictions: &[(String, String)]) -> Result<f64, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::Empty { what: "predictions" });
    }
    let correct = predictions.iter().filter(|(p, t)| p == t).count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Boxes any inner-module error with the run it occurred in.
fn run_err(
    run: usize,
    e: impl std::error::Error + Send + Sync + 'static,
) -> EvalError {
    EvalError::Run { run, source: Box::new(e) }
}

/// Usable (fixation, saccade) feature vectors of one transformed series.
fn usable_features(
    series: &GazeSeries,
    mechanism: &MechanismConfig,
    relabel: bool,
    run: usize,
) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>), EvalError> {
    let transformed = apply_mechanism(series, mechanism).map_err(|e| run_err(run, e))?;
    let labeled = if relabel && transformed.len() >= 2 {
        detect_events_ivt(&transformed, &IvtParams::default()).map_err(|e| run_err(run, e))?
    } else {
        transformed
    };
    let events = segment_events(&labeled).map_err(|e| run_err(run, e))?;
    let mut fixations = Vec::new();
    let mut saccades = Vec::new();
    for event in &events {
        if event.sample_range.len() < 2 {
            continue;
        }
        match event.kind {
            EventLabel::Fixation | EventLabel::Saccade => {
                let vector =
                    extract_features(event, series.subject_id(), series.stimulus_id())
                        .map_err(|e| run_err(run, e))?;
                match event.kind {
                    EventLabel::Fixation => fixations.push(vector),
                    _ => saccades.push(vector),
                }
            }
            _ => {}
        }
    }
    Ok((fixations, saccades))
}

/// Builds and trains one class network, degrading gracefully on sparse
/// training data: if some subject has fewer than `k` vectors the cluster
/// count drops to the minimum available, and if some subject has none at
/// all the network is skipped (`None`) so classification falls back to the
/// other class alone.
fn build_class_network(
    features: &[FeatureVector],
    class: EventClass,
    subjects: &[&String],
    k: usize,
    seed: u64,
    run: usize,
) -> Result<Option<(RbfNetwork, usize)>, EvalError> {
    let min_count = subjects
        .iter()
        .map(|subject| features.iter().filter(|f| &f.subject_id == *subject).count())
        .min()
        .unwrap_or(0);
    if min_count == 0 {
        return Ok(None);
    }
    let k_eff = k.min(min_count);
    let mut network =
        build_network(features, class, k_eff, seed).map_err(|e| run_err(run, e))?;
    network.train(features).map_err(|e| run_err(run, e))?;
    Ok(Some((network, k_eff)))
}

/// One complete split-train-classify run.
fn single_run(dataset: &Dataset, cfg: &EvalConfig, run: usize) -> Result<RunSummary, EvalError> {
    let stimulus_ids: Vec<String> = dataset.stimuli.iter().map(|s| s.id.clone()).collect();
    let run_seed = mix_seed(cfg.seed, &[run as u64]);
    let (train_stims, test_stims) =
        split_stimuli(&stimulus_ids, cfg.train_fraction, run_seed)?;
    // Randomized mechanisms redraw their noise each run.
    let mechanism = cfg.mechanism.with_seed(mix_seed(cfg.mechanism.rng_seed, &[run as u64]));

    // Subjects must have data on every sampled stimulus; others are
    // dropped from this run and counted.
    let mut active: Vec<&String> = Vec::new();
    let mut dropped = 0usize;
    for subject in &dataset.subjects {
        let complete = stimulus_ids.iter().all(|stim| dataset.get(subject, stim).is_some());
        if complete {
            active.push(subject);
        } else {
            dropped += 1;
        }
    }
    if active.len() < 2 {
        return Err(EvalError::Run {
            run,
            source: format!(
                "only {} subject(s) have complete data; need at least 2",
                active.len()
            )
            .into(),
        });
    }

    let mut train_fixations = Vec::new();
    let mut train_saccades = Vec::new();
    for subject in &active {
        for stim in &train_stims {
            let series = dataset.get(subject, stim).expect("active subjects are complete");
            let (fix, sacc) =
                usable_features(series, &mechanism, cfg.relabel_after_mechanism, run)?;
            train_fixations.extend(fix);
            train_saccades.extend(sacc);
        }
    }

    let fixation_net = build_class_network(
        &train_fixations,
        EventClass::Fixation,
        &active,
        cfg.k_clusters,
        mix_seed(run_seed, &[1]),
        run,
    )?;
    let saccade_net = build_class_network(
        &train_saccades,
        EventClass::Saccade,
        &active,
        cfg.k_clusters,
        mix_seed(run_seed, &[2]),
        run,
    )?;

    let fix_ref = fixation_net.as_ref().map(|(n, _)| n);
    let sacc_ref = saccade_net.as_ref().map(|(n, _)| n);

    let mut predictions: Vec<(String, String)> = Vec::new();
    let mut empty_streams = 0usize;
    let mut classify = |events: Vec<FeatureVector>, truth: &str| -> Result<(), EvalError> {
        // Vectors of a class without a trained network cannot be scored.
        let usable: Vec<FeatureVector> = events
            .into_iter()
            .filter(|v| match v.class {
                EventClass::Fixation => fix_ref.is_some(),
                EventClass::Saccade => sacc_ref.is_some(),
            })
            .collect();
        if usable.is_empty() {
            // An unclassifiable stream is a failed identification, not a
            // skipped one.
            empty_streams += 1;
            predictions.push((String::new(), truth.to_string()));
            return Ok(());
        }
        let outcome =
            classify_stream(fix_ref, sacc_ref, &usable).map_err(|e| run_err(run, e))?;
        predictions.push((outcome.predicted, truth.to_string()));
        Ok(())
    };

    for subject in &active {
        if cfg.whole_test_set_streams {
            let mut pooled = Vec::new();
            for stim in &test_stims {
                let series = dataset.get(subject, stim).expect("active subjects are complete");
                let (fix, sacc) =
                    usable_features(series, &mechanism, cfg.relabel_after_mechanism, run)?;
                pooled.extend(fix);
                pooled.extend(sacc);
            }
            classify(pooled, subject)?;
        } else {
            for stim in &test_stims {
                let series = dataset.get(subject, stim).expect("active subjects are complete");
                let (fix, sacc) =
                    usable_features(series, &mechanism, cfg.relabel_after_mechanism, run)?;
                let mut events = fix;
                events.extend(sacc);
                classify(events, subject)?;
            }
        }
    }

    let ir = identification_rate(&predictions)?;
    Ok(RunSummary {
        run,
        ir,
        comparisons: predictions.len(),
        empty_streams,
        dropped_subjects: dropped,
        fixation_k: fixation_net.map_or(0, |(_, k)| k),
        saccade_k: saccade_net.map_or(0, |(_, k)| k),
    })
}

/// Runs the full identification-rate protocol and aggregates a report.
///
/// Each run derives its own seed from (config seed, run index), so runs
/// are independent and the report is identical whether they execute in
/// parallel or serially.
pub fn run_identification(dataset: &Dataset, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    cfg.validate(dataset.stimuli.len())?;
    if dataset.subjects.is_empty() {
        return Err(EvalError::InvalidConfig { reason: "dataset declares no subjects".into() });
    }

    let summaries: Vec<RunSummary> = if cfg.parallel {
        (0..cfg.runs)
            .into_par_iter()
            .map(|run| single_run(dataset, cfg, run))
            .collect::<Result<_, _>>()?
    } else {
        (0..cfg.runs).map(|run| single_run(dataset, cfg, run)).collect::<Result<_, _>>()?
    };

    let per_run_ir: Vec<f64> = summaries.iter().map(|s| s.ir).collect();
    Ok(EvalReport {
        mechanism: cfg.mechanism.to_string(),
        ir_mean: EvalReport::mean(&per_run_ir),
        ir_std: EvalReport::population_std(&per_run_ir),
        per_run_ir,
        chance_rate: 1.0 / dataset.subjects.len() as f64,
        subject_count: dataset.subjects.len(),
        train_fraction: cfg.train_fraction,
        k_clusters: cfg.k_clusters,
        runs: summaries,
        utility: None,
    })
}
