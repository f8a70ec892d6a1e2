//! Report emission: a CSV line per experiment (stable column order) and a
//! JSON document with full provenance.
//!
//! JSON output is deterministic for a fixed seed and configuration except
//! for the single top-level `timestamp` field; wall-clock durations go to
//! the CSV only.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::CoreError;
use crate::experiments::{ExperimentReport, SweepConfig};

pub const CSV_HEADER: &str =
    "k,L,eps,tau,p,a2,ratio_mart_brute,ratio_mart_ledger,ratio_sq,test_max,weak_max,seconds";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn csv_row(r: &ExperimentReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.k,
        r.levels,
        r.eps,
        r.tau_w,
        r.p,
        opt(r.a2),
        opt(r.ratio_mart_brute),
        opt(r.ratio_mart_ledger),
        opt(r.ratio_sq),
        opt(r.test_max),
        opt(r.weak_max),
        r.seconds,
    )
}

pub fn write_csv(path: &Path, reports: &[ExperimentReport]) -> Result<(), CoreError> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct SweepDocument<'a> {
    version: &'static str,
    timestamp: String,
    config: SweepEcho<'a>,
    complete: bool,
    pass: bool,
    experiments: &'a [ExperimentReport],
}

#[derive(Serialize)]
struct SweepEcho<'a> {
    suite: &'a crate::experiments::Suite,
    k_min: u32,
    k_max: u32,
    levels: Option<u32>,
    mode: crate::scalar::Mode,
    seed: u64,
    max_forming: usize,
    depth_cap: u32,
    lambda_grid: usize,
}

fn timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{secs}")
}

/// Render the sweep as a JSON document. Everything except `timestamp` is a
/// pure function of the configuration and seed.
pub fn sweep_json(
    cfg: &SweepConfig,
    reports: &[ExperimentReport],
    complete: bool,
) -> String {
    let doc = SweepDocument {
        version: env!("CARGO_PKG_VERSION"),
        timestamp: timestamp(),
        config: SweepEcho {
            suite: &cfg.suite,
            k_min: cfg.k_min,
            k_max: cfg.k_max,
            levels: cfg.levels,
            mode: cfg.mode,
            seed: cfg.seed,
            max_forming: cfg.max_forming,
            depth_cap: cfg.depth_cap,
            lambda_grid: cfg.lambda_grid,
        },
        complete,
        pass: complete && reports.iter().all(|r| r.all_passed()),
        experiments: reports,
    };
    serde_json::to_string_pretty(&doc).expect("report serialization")
}

pub fn write_json(path: &Path, json: &str) -> Result<(), CoreError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(json.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Strip the timestamp line, for byte-comparing deterministic reruns.
pub fn without_timestamp(json: &str) -> String {
    json.lines()
        .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}
