//! Generates a small synthetic gaze dataset, saves it to disk, and loads it
//! back, printing a summary of what was produced.
//!
//! ```sh
//! cargo run --example synthesize_dataset [out_dir]
//! ```
//!
//! With no argument the dataset lands in a temporary directory. Every
//! recording is a CSV of `t_ms,x_deg,y_deg,label` rows; a `manifest.json`
//! ties them together with subject/stimulus/AOI metadata.

use std::error::Error;

use gazegate::data_io::{load_dataset, save_dataset};
use gazegate::synth::{generate_dataset, ProfilePreset, SynthConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let cfg = SynthConfig {
        subjects: 4,
        stimuli: 3,
        duration_s: 10.0,
        rate_hz: 120.0,
        seed: 7,
        aois_per_stimulus: 2,
        preset: ProfilePreset::Distinct,
        pursuit: true,
    };
    let generated = generate_dataset(&cfg)?;

    println!("generated {} recordings", generated.dataset.len());
    for (subject, profile) in generated.dataset.subjects.iter().zip(&generated.profiles) {
        println!(
            "  subject {subject}: fixations {:.0} +- {:.0} ms, saccades {:.1} deg, \
             vmax {:.0} deg/s",
            profile.fixation_duration_mean_ms,
            profile.fixation_duration_std_ms,
            profile.saccade_amplitude_mean_deg,
            profile.main_sequence_vmax
        );
    }

    let keep;
    let dir = match std::env::args().nth(1) {
        Some(path) => std::path::PathBuf::from(path),
        None => {
            keep = tempfile::tempdir()?;
            keep.path().to_path_buf()
        }
    };
    let manifest = save_dataset(&generated.dataset, &dir)?;
    println!("\nsaved to {}", manifest.display());

    let reloaded = load_dataset(&manifest)?;
    assert_eq!(reloaded.len(), generated.dataset.len());
    let series = reloaded.recordings().next().expect("nonempty dataset");
    println!(
        "reloaded {} recordings; first is subject {} on {} ({} samples at {} Hz)",
        reloaded.len(),
        series.subject_id(),
        series.stimulus_id(),
        series.len(),
        series.sampling_rate_hz()
    );
    Ok(())
}
