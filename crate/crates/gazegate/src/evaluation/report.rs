//! Stable textual renderings of evaluation reports: a flat CSV (one row
//! per run per mechanism) for machines and a summary for humans.

use super::EvalReport;
use std::fmt::Write;

/// Header of the flat report CSV. The schema is stable: tools may rely on
/// these columns and their order.
pub const REPORT_CSV_HEADER: &str = "mechanism,run,ir,chance,dwell_rmse_s,kl,pred_err_deg";

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Renders reports as CSV, one row per run per mechanism. Utility metrics
/// are per mechanism and repeat on each of its rows; absent metrics leave
/// their cells empty. Floats use the shortest exact decimal form, so equal
/// reports render to identical bytes.
pub fn render_reports_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for report in reports {
        let (dwell, kl, pred) = match &report.utility {
            Some(u) => (opt(u.dwell_rmse_s), opt(u.kl_divergence), opt(u.prediction_error_deg)),
            None => (String::new(), String::new(), String::new()),
        };
        for summary in &report.runs {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                report.mechanism, summary.run, summary.ir, report.chance_rate, dwell, kl, pred
            )
            .expect("writing to a String cannot fail");
        }
    }
    out
}

/// Renders a human-readable multi-mechanism summary.
pub fn render_reports_text(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    for (i, report) in reports.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        writeln!(out, "mechanism {}", report.mechanism).unwrap();
        writeln!(
            out,
            "  identification rate: mean {:.4}, std {:.4} over {} runs (chance {:.4})",
            report.ir_mean,
            report.ir_std,
            report.per_run_ir.len(),
            report.chance_rate
        )
        .unwrap();
        let per_run: Vec<String> =
            report.per_run_ir.iter().map(|ir| format!("{ir:.4}")).collect();
        writeln!(out, "  per-run ir: {}", per_run.join(" ")).unwrap();
        writeln!(
            out,
            "  protocol: {} subjects, train fraction {}, k {}",
            report.subject_count, report.train_fraction, report.k_clusters
        )
        .unwrap();
        let empty: usize = report.runs.iter().map(|r| r.empty_streams).sum();
        let dropped: usize = report.runs.iter().map(|r| r.dropped_subjects).sum();
        if empty > 0 || dropped > 0 {
            writeln!(
                out,
                "  degradations: {empty} empty stream(s), {dropped} dropped subject-run(s)"
            )
            .unwrap();
        }
        if let Some(u) = &report.utility {
            let fmt = |v: Option<f64>| match v {
                Some(v) => format!("{v:.6}"),
                None => "n/a".to_string(),
            };
            writeln!(
                out,
                "  utility: dwell rmse {} s, kl {} nats, prediction error {} deg",
                fmt(u.dwell_rmse_s),
                fmt(u.kl_divergence),
                fmt(u.prediction_error_deg)
            )
            .unwrap();
        }
    }
    out
}
