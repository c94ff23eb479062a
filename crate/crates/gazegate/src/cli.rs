//! Command-line front end (`gazegate` binary).
//!
//! Subcommands cover the pipeline end to end: `synth` generates datasets,
//! `privatize` applies a privacy mechanism, `detect` relabels oculomotor
//! events, `evaluate` sweeps mechanisms through the re-identification
//! benchmark, `utility` compares two datasets, `serve` exposes recordings
//! through the gatekeeper protocol, and `inspect` prints stats. Every
//! subcommand is deterministic given its flags and seed. Exit codes:
//! 0 success, 1 domain error, 2 usage error. Set `GAZEGATE_LOG`
//! (`off|info|debug`) for progress logging on standard error.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Parser, Subcommand, ValueEnum};

use crate::data_io::{load_dataset, read_recording, save_dataset, Dataset};
use crate::evaluation::{
    render_reports_csv, render_reports_text, run_identification, utility_metrics, EvalConfig,
    UtilityMetrics, UtilityParams,
};
use crate::gatekeeper::{policy_from_json, serve, ReplaySource, SessionPolicy};
use crate::gaze::{detect_events_ivt, segment_events, GazeSeries, IvtParams};
use crate::privacy::{apply_mechanism, MechanismConfig};
use crate::synth::{generate_dataset, ProfilePreset, SynthConfig};

type DynError = Box<dyn std::error::Error + Send + Sync + 'static>;

#[derive(Parser)]
#[command(
    name = "gazegate",
    version,
    about = "Privacy-preserving gaze pipeline: synthesis, mechanisms, re-identification \
             benchmarks, and a query-gated replay server"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic gaze dataset.
    Synth(SynthArgs),
    /// Apply a privacy mechanism to every recording of a dataset.
    Privatize(PrivatizeArgs),
    /// Re-run velocity-threshold event detection and write the relabeled
    /// dataset.
    Detect(DetectArgs),
    /// Sweep privacy mechanisms through the re-identification benchmark
    /// and write CSV + text reports.
    Evaluate(EvaluateArgs),
    /// Utility metrics (dwell RMSE, saliency KL, prediction error)
    /// between an original and a transformed dataset.
    Utility(UtilityArgs),
    /// Serve a dataset through the gatekeeper wire protocol.
    Serve(ServeArgs),
    /// Print statistics for a dataset manifest or a single recording CSV.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    /// Clearly separated per-subject oculomotor parameters.
    Distinct,
    /// Overlapping parameter distributions (harder identification).
    Overlapping,
}

impl From<PresetArg> for ProfilePreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Distinct => ProfilePreset::Distinct,
            PresetArg::Overlapping => ProfilePreset::Overlapping,
        }
    }
}

#[derive(clap::Args)]
struct SynthArgs {
    /// Output directory for the dataset.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 18)]
    subjects: usize,
    #[arg(long, default_value_t = 50)]
    stimuli: usize,
    #[arg(long, default_value_t = 25.0)]
    duration_s: f64,
    #[arg(long, default_value_t = 120.0)]
    rate_hz: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Areas of interest declared per stimulus.
    #[arg(long, default_value_t = 2)]
    aois: usize,
    #[arg(long, value_enum, default_value_t = PresetArg::Distinct)]
    preset: PresetArg,
    /// Insert one smooth-pursuit segment per recording.
    #[arg(long)]
    pursuit: bool,
}

#[derive(clap::Args)]
struct PrivatizeArgs {
    /// Path to the source dataset's manifest.json.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for the transformed dataset.
    #[arg(long)]
    out: PathBuf,
    /// Mechanism in canonical form: identity | gaussian:SIGMA:SEED |
    /// temporal:K | spatial:L.
    #[arg(long)]
    mechanism: String,
}

#[derive(clap::Args)]
struct DetectArgs {
    /// Path to the source dataset's manifest.json.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for the relabeled dataset.
    #[arg(long)]
    out: PathBuf,
    /// Velocity threshold in deg/s separating fixation from saccade
    /// candidates.
    #[arg(long, default_value_t = 70.0)]
    velocity_threshold: f64,
    /// Fixations shorter than this (ms) are absorbed by their neighbors.
    #[arg(long, default_value_t = 100.0)]
    min_fixation_ms: f64,
    /// Above-threshold runs longer than this (ms) become smooth pursuit.
    #[arg(long, default_value_t = 150.0)]
    max_saccade_ms: f64,
    /// Fixation pairs separated by less than this (ms) may merge.
    #[arg(long, default_value_t = 75.0)]
    merge_gap_ms: f64,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    /// Path to the dataset's manifest.json.
    #[arg(long)]
    input: PathBuf,
    /// Directory for report.csv and report.txt.
    #[arg(long)]
    out: PathBuf,
    /// Mechanisms to sweep (canonical form); repeat the flag or separate
    /// with commas.
    #[arg(long = "mechanism", required = true, value_delimiter = ',')]
    mechanisms: Vec<String>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0.75)]
    train_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// RBF centers per subject and event kind.
    #[arg(long, default_value_t = crate::biometric::DEFAULT_K)]
    k: usize,
    /// Run the sweep on one thread (results are identical either way).
    #[arg(long)]
    serial: bool,
    /// Skip the utility metrics columns.
    #[arg(long)]
    no_utility: bool,
}

#[derive(clap::Args)]
struct UtilityArgs {
    /// Manifest of the original dataset.
    #[arg(long)]
    original: PathBuf,
    /// Manifest of the transformed dataset.
    #[arg(long)]
    transformed: PathBuf,
    /// Optional directory for utility.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ServeArgs {
    /// Dataset manifest.json or a single recording CSV to serve.
    #[arg(long)]
    input: PathBuf,
    /// Bind address; use port 0 for an ephemeral port.
    #[arg(long, default_value = "127.0.0.1:4780")]
    listen: String,
    /// Default session policy as JSON, e.g.
    /// '{"saccade_phase_events":true,"sample_mechanism":"spatial:64"}'.
    /// Clients may narrow this policy, never widen it.
    #[arg(long)]
    policy: Option<String>,
}

#[derive(clap::Args)]
struct InspectArgs {
    /// Dataset manifest.json or a single recording CSV.
    #[arg(long)]
    input: PathBuf,
}

/// Entry point for the `gazegate` binary; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Runs the CLI against an explicit argument vector (argv[0] included).
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and succeed;
            // everything else is a usage error.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("GAZEGATE_LOG", "off");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn dispatch(command: Command) -> Result<(), DynError> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Privatize(args) => cmd_privatize(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Utility(args) => cmd_utility(args),
        Command::Serve(args) => cmd_serve(args),
        Command::Inspect(args) => cmd_inspect(args),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<(), DynError> {
    let cfg = SynthConfig {
        subjects: args.subjects,
        stimuli: args.stimuli,
        duration_s: args.duration_s,
        rate_hz: args.rate_hz,
        seed: args.seed,
        aois_per_stimulus: args.aois,
        preset: args.preset.into(),
        pursuit: args.pursuit,
    };
    log::info!(
        "generating {} subjects x {} stimuli at {} Hz",
        cfg.subjects,
        cfg.stimuli,
        cfg.rate_hz
    );
    let generated = generate_dataset(&cfg)?;
    let manifest = save_dataset(&generated.dataset, &args.out)?;
    println!(
        "wrote {} recordings ({} subjects, {} stimuli) to {}",
        generated.dataset.len(),
        args.subjects,
        args.stimuli,
        manifest.display()
    );
    Ok(())
}

fn cmd_privatize(args: PrivatizeArgs) -> Result<(), DynError> {
    let config: MechanismConfig = args.mechanism.parse()?;
    let dataset = load_dataset(&args.input)?;
    log::info!("applying {config} to {} recordings", dataset.len());
    let transformed = dataset.try_map(|series| apply_mechanism(series, &config))?;
    let manifest = save_dataset(&transformed, &args.out)?;
    println!("wrote {} under mechanism {} to {}", transformed.len(), config, manifest.display());
    Ok(())
}

fn cmd_detect(args: DetectArgs) -> Result<(), DynError> {
    let params = IvtParams {
        velocity_threshold: args.velocity_threshold,
        min_fixation_ms: args.min_fixation_ms,
        max_saccade_ms: args.max_saccade_ms,
        merge_gap_ms: args.merge_gap_ms,
    };
    let dataset = load_dataset(&args.input)?;
    let relabeled = dataset.try_map(|series| detect_events_ivt(series, &params))?;
    let mut kind_counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for series in relabeled.recordings() {
        for event in segment_events(series)? {
            *kind_counts.entry(event.kind.code()).or_default() += 1;
        }
    }
    let manifest = save_dataset(&relabeled, &args.out)?;
    let counts: Vec<String> =
        kind_counts.iter().map(|(kind, n)| format!("{kind}={n}")).collect();
    println!("relabeled {} recordings ({}) to {}", relabeled.len(), counts.join(" "), manifest.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), DynError> {
    let dataset = load_dataset(&args.input)?;
    let mut reports = Vec::new();
    for mechanism_text in &args.mechanisms {
        let mechanism: MechanismConfig = mechanism_text.parse()?;
        let cfg = EvalConfig {
            train_fraction: args.train_fraction,
            runs: args.runs,
            seed: args.seed,
            k_clusters: args.k,
            mechanism,
            parallel: !args.serial,
            ..EvalConfig::default()
        };
        log::info!("evaluating {mechanism} over {} runs", args.runs);
        let mut report = run_identification(&dataset, &cfg)?;
        if !args.no_utility {
            let transformed = dataset.try_map(|series| apply_mechanism(series, &mechanism))?;
            report.utility =
                Some(utility_metrics(&dataset, &transformed, &UtilityParams::default())?);
        }
        reports.push(report);
    }
    std::fs::create_dir_all(&args.out)?;
    let csv = render_reports_csv(&reports);
    let text = render_reports_text(&reports);
    std::fs::write(args.out.join("report.csv"), &csv)?;
    std::fs::write(args.out.join("report.txt"), &text)?;
    print!("{text}");
    println!("reports written to {}", args.out.display());
    Ok(())
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_text(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".to_string())
}

fn cmd_utility(args: UtilityArgs) -> Result<(), DynError> {
    let original = load_dataset(&args.original)?;
    let transformed = load_dataset(&args.transformed)?;
    let metrics: UtilityMetrics =
        utility_metrics(&original, &transformed, &UtilityParams::default())?;
    println!("dwell rmse (s): {}", opt_text(metrics.dwell_rmse_s));
    println!("saliency kl (nats): {}", opt_text(metrics.kl_divergence));
    println!("prediction error (deg): {}", opt_text(metrics.prediction_error_deg));
    if let Some(out) = args.out {
        std::fs::create_dir_all(&out)?;
        let csv = format!(
            "dwell_rmse_s,kl,pred_err_deg\n{},{},{}\n",
            opt_cell(metrics.dwell_rmse_s),
            opt_cell(metrics.kl_divergence),
            opt_cell(metrics.prediction_error_deg)
        );
        std::fs::write(out.join("utility.csv"), csv)?;
        println!("utility.csv written to {}", out.display());
    }
    Ok(())
}

static SHUTDOWN_REQUESTED: AtomicBool = AtomicBool::new(false);

extern "C" fn request_shutdown(_signal: libc::c_int) {
    SHUTDOWN_REQUESTED.store(true, Ordering::SeqCst);
}

fn install_shutdown_handler() {
    let handler = request_shutdown as extern "C" fn(libc::c_int);
    unsafe {
        libc::signal(libc::SIGINT, handler as libc::sighandler_t);
        libc::signal(libc::SIGTERM, handler as libc::sighandler_t);
    }
}

fn cmd_serve(args: ServeArgs) -> Result<(), DynError> {
    let source = if args.input.extension().is_some_and(|e| e == "csv") {
        ReplaySource::from_series(read_recording(&args.input)?)
    } else {
        ReplaySource::from_dataset(&load_dataset(&args.input)?)
    };
    let policy = match &args.policy {
        Some(json) => policy_from_json(SessionPolicy::default(), json)?,
        None => SessionPolicy::default(),
    };
    let server = serve(&args.listen, source, policy)?;
    println!("listening on {}", server.local_addr());
    std::io::stdout().flush()?;
    install_shutdown_handler();
    while !SHUTDOWN_REQUESTED.load(Ordering::SeqCst) {
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    log::info!("signal received, shutting down");
    server.shutdown();
    println!("shutdown complete");
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> Result<(), DynError> {
    if args.input.extension().is_some_and(|e| e == "csv") {
        inspect_recording(&read_recording(&args.input)?)
    } else {
        inspect_dataset(&load_dataset(&args.input)?)
    }
}

fn inspect_recording(series: &GazeSeries) -> Result<(), DynError> {
    let samples = series.samples();
    let duration_s = if samples.len() > 1 {
        (samples[samples.len() - 1].t_ms - samples[0].t_ms) / 1000.0
    } else {
        0.0
    };
    println!("subject: {}", display_id(series.subject_id()));
    println!("stimulus: {}", display_id(series.stimulus_id()));
    println!("samples: {}", samples.len());
    println!("rate_hz: {}", series.sampling_rate_hz());
    println!("duration_s: {duration_s}");
    let mut label_counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for sample in samples {
        *label_counts.entry(sample.label.code()).or_default() += 1;
    }
    let labels: Vec<String> =
        label_counts.iter().map(|(code, n)| format!("{code}={n}")).collect();
    println!("labels: {}", labels.join(" "));
    let mut kind_counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for event in segment_events(series)? {
        *kind_counts.entry(event.kind.code()).or_default() += 1;
    }
    let events: Vec<String> =
        kind_counts.iter().map(|(code, n)| format!("{code}={n}")).collect();
    println!("events: {}", events.join(" "));
    Ok(())
}

fn display_id(id: &str) -> &str {
    if id.is_empty() {
        "(unset)"
    } else {
        id
    }
}

fn inspect_dataset(dataset: &Dataset) -> Result<(), DynError> {
    println!("name: {}", dataset.name);
    println!("rate_hz: {}", dataset.rate_hz);
    println!("subjects: {}", dataset.subjects.len());
    println!("stimuli: {}", dataset.stimuli.len());
    println!("recordings: {}", dataset.len());
    let total_samples: usize = dataset.recordings().map(|s| s.len()).sum();
    println!("samples: {total_samples}");
    let total_aois: usize = dataset.stimuli.iter().map(|s| s.aois.len()).sum();
    println!("aois: {total_aois}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;
    use tempfile::tempdir;

    fn run(args: &[&str]) -> i32 {
        let mut argv = vec!["gazegate"];
        argv.extend_from_slice(args);
        run_from(argv)
    }

    fn synth_small(dir: &Path) -> PathBuf {
        let out = dir.join("data");
        let code = run(&[
            "synth",
            "--out",
            out.to_str().unwrap(),
            "--subjects",
            "3",
            "--stimuli",
            "3",
            "--duration-s",
            "4",
            "--seed",
            "7",
        ]);
        assert_eq!(code, 0);
        out.join("manifest.json")
    }

    #[test]
    fn unknown_flags_and_missing_subcommands_are_usage_errors() {
        assert_eq!(run(&["synth", "--bogus", "x"]), 2);
        assert_eq!(run(&[]), 2);
        assert_eq!(run(&["frobnicate"]), 2);
    }

    #[test]
    fn invalid_quantization_factor_is_a_domain_error() {
        let dir = tempdir().unwrap();
        let manifest = synth_small(dir.path());
        let out = dir.path().join("private");
        let code = run(&[
            "privatize",
            "--input",
            manifest.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--mechanism",
            "spatial:7",
        ]);
        assert_eq!(code, 1, "7 does not divide the pixel grid");
        // A valid factor succeeds and writes a loadable dataset.
        let code = run(&[
            "privatize",
            "--input",
            manifest.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--mechanism",
            "spatial:64",
        ]);
        assert_eq!(code, 0);
        assert!(out.join("manifest.json").is_file());
        let reloaded = load_dataset(&out.join("manifest.json")).unwrap();
        assert_eq!(reloaded.len(), 9);
    }

    #[test]
    fn evaluate_writes_byte_identical_reports() {
        let dir = tempdir().unwrap();
        let manifest = synth_small(dir.path());
        let evaluate = |out: &Path| {
            let code = run(&[
                "evaluate",
                "--input",
                manifest.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--mechanism",
                "identity,temporal:3",
                "--runs",
                "2",
                "--k",
                "4",
                "--seed",
                "11",
            ]);
            assert_eq!(code, 0);
            (
                std::fs::read(out.join("report.csv")).unwrap(),
                std::fs::read(out.join("report.txt")).unwrap(),
            )
        };
        let (csv_a, text_a) = evaluate(&dir.path().join("r1"));
        let (csv_b, text_b) = evaluate(&dir.path().join("r2"));
        assert_eq!(csv_a, csv_b);
        assert_eq!(text_a, text_b);
        let csv = String::from_utf8(csv_a).unwrap();
        assert!(csv.starts_with("mechanism,run,ir,chance,dwell_rmse_s,kl,pred_err_deg\n"));
        // Two mechanisms x two runs.
        assert_eq!(csv.lines().count(), 5);
        // Identity's utility columns are exactly zero.
        let identity_row = csv.lines().nth(1).unwrap();
        let cells: Vec<&str> = identity_row.split(',').collect();
        assert_eq!(cells[0], "identity");
        assert_eq!(cells[4], "0");
        assert_eq!(cells[5], "0");
    }

    #[test]
    fn detect_and_inspect_succeed_on_generated_data() {
        let dir = tempdir().unwrap();
        let manifest = synth_small(dir.path());
        let out = dir.path().join("relabeled");
        let code = run(&[
            "detect",
            "--input",
            manifest.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        assert_eq!(run(&["inspect", "--input", out.join("manifest.json").to_str().unwrap()]), 0);
        let recording = out.join("recordings").join("s01").join("stim01.csv");
        assert!(recording.is_file());
        assert_eq!(run(&["inspect", "--input", recording.to_str().unwrap()]), 0);
        // Nonexistent input is a domain error, not a crash.
        assert_eq!(run(&["inspect", "--input", "/nonexistent/manifest.json"]), 1);
    }

    #[test]
    fn utility_of_a_dataset_against_itself_is_zero() {
        let dir = tempdir().unwrap();
        let manifest = synth_small(dir.path());
        let out = dir.path().join("util");
        let code = run(&[
            "utility",
            "--original",
            manifest.to_str().unwrap(),
            "--transformed",
            manifest.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let csv = std::fs::read_to_string(out.join("utility.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("dwell_rmse_s,kl,pred_err_deg"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "0");
        assert_eq!(row[1], "0");
        // Prediction error measures the stream's own predictability, so it
        // is positive even when nothing was transformed.
        let pred: f64 = row[2].parse().unwrap();
        assert!(pred.is_finite() && pred >= 0.0);
    }

    #[test]
    fn bad_policy_json_fails_serve_before_binding() {
        let dir = tempdir().unwrap();
        let manifest = synth_small(dir.path());
        let code = run(&[
            "serve",
            "--input",
            manifest.to_str().unwrap(),
            "--listen",
            "127.0.0.1:0",
            "--policy",
            "not json",
        ]);
        assert_eq!(code, 1);
    }
}
