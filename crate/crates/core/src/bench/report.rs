//! JSON and CSV output of an experiment.

use std::fs;
use std::path::Path;

use super::ExperimentReport;
use crate::error::{Error, Result};

/// `(det - robust) / det`; zero when the deterministic error is zero.
pub fn improvement_ratio(deterministic: f64, robust: f64) -> f64 {
    if deterministic == 0.0 {
        0.0
    } else {
        (deterministic - robust) / deterministic
    }
}

fn p_column(p: &crate::bounds::NormExponent) -> String {
    format!("robust_p{p}")
}

/// One row per holdout and deterministic configuration. Robust columns
/// are filled on the row of the configuration the robust sweep used.
/// Numbers use the shortest representation that parses back exactly.
pub fn report_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "dataset",
        "m",
        "n",
        "beta",
        "transform",
        "kernel",
        "deterministic_error",
        "deterministic_std",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(report.config.p_list.iter().map(p_column));
    header.extend(["best_robust", "improvement_ratio", "cpu_time_s"].map(String::from));
    w.write_record(&header)?;

    for h in &report.holdouts {
        for (k, c) in h.deterministic.iter().enumerate() {
            let mut row = vec![
                report.name.clone(),
                report.m.to_string(),
                report.n.to_string(),
                h.beta.to_string(),
                c.transform.to_string(),
                c.kernel_label.clone(),
                c.summary.mean.to_string(),
                c.summary.std.to_string(),
            ];
            let robust = h.robust.as_ref().filter(|_| k == h.best);
            for p in &report.config.p_list {
                let cell = robust
                    .and_then(|r| r.by_p.iter().find(|b| b.p == *p))
                    .map(|b| b.best.mean.to_string())
                    .unwrap_or_default();
                row.push(cell);
            }
            row.push(robust.map(|r| r.best_error.to_string()).unwrap_or_default());
            row.push(robust.map(|r| r.improvement_ratio.to_string()).unwrap_or_default());
            row.push(c.summary.mean_train_seconds.map(|t| t.to_string()).unwrap_or_default());
            w.write_record(&row)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidParameter(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `<stem>.json` and `<stem>.csv` into `dir`, creating it if needed.
pub fn emit_report(report: &ExperimentReport, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join(format!("{stem}.json"));
    fs::write(&json, report.to_json()?).map_err(|e| Error::io(&json, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, report_csv(report)?).map_err(|e| Error::io(&csv_path, e))?;
    Ok(())
}
