//! Runs velocity-threshold event detection on a synthetic recording and
//! prints the segmented fixations, saccades, and pursuit episodes.
//!
//! ```sh
//! cargo run --example detect_and_segment
//! ```
//!
//! The detector classifies each sample by its angular velocity (saccade
//! above the fast threshold, pursuit in the middle band when enabled,
//! fixation below), merges short flickers, and the segmenter turns maximal
//! label runs into events with kinematic statistics.

use std::error::Error;

use gazegate::gaze::{detect_events_ivt, segment_events, EventLabel, IvtParams};
use gazegate::synth::{generate_dataset, ProfilePreset, SynthConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let cfg = SynthConfig {
        subjects: 2,
        stimuli: 2,
        duration_s: 4.0,
        rate_hz: 120.0,
        seed: 3,
        preset: ProfilePreset::Distinct,
        pursuit: true,
        ..SynthConfig::default()
    };
    let dataset = generate_dataset(&cfg)?.dataset;
    let series = dataset.recordings().next().expect("nonempty dataset");

    // The generator emits ground-truth labels; strip them and let the
    // detector recover events from positions alone.
    let unlabeled = series.with_samples(
        series
            .samples()
            .iter()
            .map(|s| {
                let mut s = *s;
                s.label = EventLabel::Unlabeled;
                s
            })
            .collect(),
    )?;

    let params = IvtParams::default();
    println!(
        "detector: saccade above {} deg/s, saccade runs over {} ms become pursuit, \
         min fixation {} ms, merge gap {} ms\n",
        params.velocity_threshold, params.max_saccade_ms, params.min_fixation_ms,
        params.merge_gap_ms
    );

    let labeled = detect_events_ivt(&unlabeled, &params)?;
    let events = segment_events(&labeled)?;

    println!(
        "{:<16} {:>9} {:>9} {:>10} {:>10} {:>10}",
        "kind", "start_ms", "dur_ms", "amp_deg", "mean_v", "peak_v"
    );
    for event in &events {
        println!(
            "{:<16} {:>9.0} {:>9.0} {:>10.2} {:>10.1} {:>10.1}",
            format!("{:?}", event.kind),
            event.start_ms,
            event.duration_ms,
            event.amplitude_deg,
            event.mean_velocity,
            event.peak_velocity
        );
    }

    let fixations = events.iter().filter(|e| e.kind == EventLabel::Fixation).count();
    let saccades = events.iter().filter(|e| e.kind == EventLabel::Saccade).count();
    let pursuits = events.iter().filter(|e| e.kind == EventLabel::SmoothPursuit).count();
    println!(
        "\n{} events over {:.1} s: {fixations} fixations, {saccades} saccades, \
         {pursuits} pursuit episodes",
        events.len(),
        series.samples().last().map_or(0.0, |s| s.t_ms) / 1000.0
    );
    Ok(())
}
