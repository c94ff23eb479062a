//! Quantifies what each privacy mechanism costs in analytic utility.
//!
//! ```sh
//! cargo run --example utility_metrics
//! ```
//!
//! Three metrics compare original and transformed data:
//!
//! * dwell-time RMSE — per (recording, AOI) difference in seconds of
//!   fixation time spent inside annotated areas of interest;
//! * saliency KL divergence — how far the transformed attention map drifts
//!   from the original (nats, pooled over all viewers per stimulus);
//! * gaze prediction error — mean angular error of a constant-velocity
//!   short-horizon predictor on the transformed data.

use std::error::Error;

use gazegate::evaluation::{utility_metrics, UtilityParams};
use gazegate::privacy::{apply_mechanism, MechanismConfig};
use gazegate::synth::{generate_dataset, SynthConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let cfg = SynthConfig {
        subjects: 4,
        stimuli: 6,
        duration_s: 10.0,
        seed: 21,
        ..SynthConfig::default()
    };
    let dataset = generate_dataset(&cfg)?.dataset;
    let params = UtilityParams::default();
    println!(
        "saliency grid: {} deg cells, {} deg smoothing; kl eps {}; \
         prediction horizon {} ms\n",
        params.cell_deg, params.smoothing_sigma_deg, params.kl_eps, params.horizon_ms
    );

    println!(
        "{:<14} {:>14} {:>10} {:>14}",
        "mechanism", "dwell_rmse_s", "kl_nats", "pred_err_deg"
    );
    for mechanism in [
        MechanismConfig::identity(),
        MechanismConfig::gaussian(10.0, 42)?,
        MechanismConfig::temporal(3)?,
        MechanismConfig::spatial(64)?,
    ] {
        let transformed = dataset.try_map(|s| apply_mechanism(s, &mechanism))?;
        let metrics = utility_metrics(&dataset, &transformed, &params)?;
        let fmt = |v: Option<f64>| match v {
            Some(v) => format!("{v:.4}"),
            None => "n/a".to_string(),
        };
        println!(
            "{:<14} {:>14} {:>10} {:>14}",
            mechanism.to_string(),
            fmt(metrics.dwell_rmse_s),
            fmt(metrics.kl_divergence),
            fmt(metrics.prediction_error_deg)
        );
    }

    println!(
        "\nidentity scores 0 on dwell RMSE and KL by construction; heavy noise \
         can erase every detectable fixation, reported as n/a rather than 0"
    );
    Ok(())
}
