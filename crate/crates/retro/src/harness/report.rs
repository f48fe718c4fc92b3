//! Run reports and their serialization: JSON documents that round-trip
//! losslessly, a JSON-lines event log appended while runs progress, and the
//! shared CSV table schema.
//!
//! CSV schema (one row per instance and method):
//!
//! ```text
//! T,n,method,event_time_us,total_time_us,cost_diff,total_regret,bound,violations
//! ```
//!
//! `event_time_us` is the median per-event time; timing fields are empty for
//! rows that carry none.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::harness::methods::MethodOutcome;
use crate::regret::{ComplexityRecord, SweepRow};

use super::config::ScenarioConfig;

pub const CSV_HEADER: &str =
    "T,n,method,event_time_us,total_time_us,cost_diff,total_regret,bound,violations";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EventReport {
    pub t: usize,
    pub kl: f64,
    pub condition: Option<f64>,
    pub delta_u_norm: f64,
    pub wall_micros: f64,
    pub iterations: usize,
    pub applied: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegretSummary {
    pub bound: f64,
    pub max: f64,
    pub total: f64,
    pub violations: Vec<usize>,
}

/// Self-contained record of one method on one scenario: re-running the
/// echoed configuration reproduces everything except wall times.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub version: String,
    pub seed: u64,
    pub method: String,
    pub scenario: ScenarioConfig,
    pub final_error: f64,
    pub total_cost: f64,
    pub converged: bool,
    pub init_micros: f64,
    /// DDP iterations of the method's initial (or oracle) solve.
    pub init_iterations: usize,
    pub events: Vec<EventReport>,
    pub regret: Option<RegretSummary>,
}

impl RunReport {
    pub fn from_outcome(
        outcome: &MethodOutcome,
        config: &ScenarioConfig,
        seed: u64,
        regret: Option<RegretSummary>,
    ) -> Self {
        RunReport {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            method: outcome.method.tag().to_string(),
            scenario: config.clone(),
            final_error: outcome.final_error,
            total_cost: outcome.true_cost,
            converged: outcome.converged,
            init_micros: outcome.init_micros,
            init_iterations: outcome.init_iterations,
            events: outcome
                .events
                .iter()
                .map(|e| EventReport {
                    t: e.t,
                    kl: e.kl,
                    condition: e.condition,
                    delta_u_norm: e.delta_u_norm,
                    wall_micros: e.wall_micros,
                    iterations: e.iterations,
                    applied: e.applied,
                })
                .collect(),
            regret,
        }
    }

    /// Copy with wall times zeroed, for determinism comparisons.
    pub fn without_timings(&self) -> Self {
        let mut c = self.clone();
        c.init_micros = 0.0;
        for e in &mut c.events {
            e.wall_micros = 0.0;
        }
        c
    }
}

/// Serialize one report to pretty JSON (floats in shortest round-trip form,
/// which parses back bit-exactly).
pub fn report_json(report: &RunReport) -> String {
    serde_json::to_string_pretty(report).expect("report serialization cannot fail")
}

pub fn write_report(dir: &Path, report: &RunReport) -> std::io::Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("report_{}_{}.json", report.method, report.seed));
    std::fs::write(&path, report_json(report))?;
    Ok(path)
}

/// Append one JSON-lines record per event, written as runs progress so
/// partial results survive interruption.
pub fn append_events(
    path: &Path,
    method: &str,
    seed: u64,
    events: &[EventReport],
) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    for e in events {
        let record = serde_json::json!({
            "method": method,
            "seed": seed,
            "t": e.t,
            "kl": e.kl,
            "condition": e.condition,
            "delta_u_norm": e.delta_u_norm,
            "wall_micros": e.wall_micros,
            "applied": e.applied,
        });
        writeln!(file, "{record}")?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:e}"),
        None => String::new(),
    }
}

/// CSV rows for benchmark records.
pub fn benchmark_csv(records: &[ComplexityRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let median_event = if r.event_micros.is_empty() {
            None
        } else {
            let mut xs = r.event_micros.clone();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Some(xs[xs.len() / 2])
        };
        out.push_str(&format!(
            "{},{},{},{},{},,,,\n",
            r.horizon,
            r.state_dim,
            r.method,
            fmt_opt(median_event),
            fmt_opt(Some(r.total_micros)),
        ));
    }
    out
}

/// CSV rows for the horizon sweep.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},4,retro,,,{:e},{:e},{:e},{}\n",
            r.horizon, r.cost_diff, r.total_regret, r.bound, r.violations
        ));
    }
    out
}

/// Summary CSV for one scenario's four methods.
pub fn run_summary_csv(reports: &[RunReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let median_event = if r.events.is_empty() {
            None
        } else {
            let mut xs: Vec<f64> = r.events.iter().map(|e| e.wall_micros).collect();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Some(xs[xs.len() / 2])
        };
        let total = r.init_micros + r.events.iter().map(|e| e.wall_micros).sum::<f64>();
        out.push_str(&format!(
            "{},{},{},{},{},,{},{},{}\n",
            r.scenario.scenario.horizon,
            r.scenario.build_model().state_dim(),
            r.method,
            fmt_opt(median_event),
            fmt_opt(Some(total)),
            r.regret
                .as_ref()
                .map(|g| format!("{:e}", g.total))
                .unwrap_or_default(),
            r.regret
                .as_ref()
                .map(|g| format!("{:e}", g.bound))
                .unwrap_or_default(),
            r.regret
                .as_ref()
                .map(|g| g.violations.len().to_string())
                .unwrap_or_default(),
        ));
    }
    out
}
