//! The `retro` command-line interface.
//!
//! Exit codes: 0 on success, 1 on configuration/validation errors, 2 on
//! runtime failures (and on bound violations from `check-bounds`).

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::regret::{
    complexity_benchmark, fit_loglog, horizon_sweep, normalization_bound_sweep, regret_bound_batch, BenchmarkConfig,
};

use super::config::ScenarioConfig;
use super::generate::parse_replay;
use super::report::{self, append_events};
use super::run::run_scenario;

#[derive(Parser)]
#[command(
    name = "retro",
    version,
    about = "Reactive trajectory optimization: DDP planning with online KL-shift control adjustment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the four-method comparison described by a scenario config.
    Run {
        /// Scenario TOML file.
        #[arg(long)]
        config: PathBuf,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: $RETRO_OUT_DIR, then the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tabular output format.
        #[arg(long, value_parser = ["csv", "json"])]
        format: Option<String>,
        /// Observation replay CSV (t, y_1..y_d, noise) replacing the
        /// generated stream.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Time per-event adjustment against full re-solves across horizons and
    /// state dimensions.
    Benchmark {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = ["csv", "json"], default_value = "csv")]
        format: String,
        /// Timing repetitions per instance (median taken).
        #[arg(long, default_value_t = 20)]
        reps: usize,
        /// Comma-separated horizon list for the T sweep.
        #[arg(long, default_value = "50,100,200,400")]
        horizons: String,
        /// Horizon used for the dimension sweep.
        #[arg(long, default_value_t = 200)]
        fixed_horizon: usize,
    },
    /// Sweep the planning horizon and tabulate cost difference and total
    /// regret against the oracle.
    SweepHorizon {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = ["csv", "json"], default_value = "csv")]
        format: String,
        #[arg(long, default_value = "10,20,50,100,200,500,1000")]
        horizons: String,
    },
    /// Property sweeps: the normalization-term bound on randomized
    /// desirability solutions and the regret bound on conforming scenarios.
    CheckBounds {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Randomized desirability instances.
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        /// Conforming scenarios per horizon.
        #[arg(long, default_value_t = 20)]
        scenarios: u64,
    },
}

fn out_dir(flag: Option<PathBuf>, config_dir: Option<&str>) -> PathBuf {
    if let Some(dir) = flag {
        return dir;
    }
    if let Ok(dir) = std::env::var("RETRO_OUT_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from(config_dir.unwrap_or("out"))
}

fn parse_horizons(spec: &str) -> Result<Vec<usize>, String> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad horizon '{s}'"))
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)
}

/// Entry point used by `main` and by tests; returns the process exit code.
pub fn cli<I>(argv: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap prints its own help/version through the error.
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            format,
            replay,
        } => cmd_run(config, seed, out, format, replay),
        Command::Benchmark {
            seed,
            out,
            format,
            reps,
            horizons,
            fixed_horizon,
        } => cmd_benchmark(seed, out, format, reps, &horizons, fixed_horizon),
        Command::SweepHorizon {
            seed,
            out,
            format,
            horizons,
        } => cmd_sweep(seed, out, format, &horizons),
        Command::CheckBounds {
            seed,
            out,
            instances,
            scenarios,
        } => cmd_check_bounds(seed, out, instances, scenarios),
    }
}

fn cmd_run(
    config_path: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Option<String>,
    replay: Option<PathBuf>,
) -> i32 {
    let mut config = match ScenarioConfig::from_path(&config_path.to_string_lossy()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Some(s) = seed {
        config.scenario.seed = s;
    }
    if let Some(f) = format {
        config.output.format = f;
    }
    let dir = out_dir(out, Some(&config.output.dir));

    let replay_obs = match replay {
        None => None,
        Some(path) => {
            let text = match std::fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read replay {}: {e}", path.display());
                    return 1;
                }
            };
            match parse_replay(&text, config.target_dim()) {
                Ok(obs) => Some(obs),
                Err(e) => {
                    eprintln!("error: {e}");
                    return 1;
                }
            }
        }
    };

    let reports = match run_scenario(&config, replay_obs) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };

    let events_log = dir.join("events.jsonl");
    for report in &reports {
        if let Err(e) = report::write_report(&dir, report) {
            eprintln!("error: writing report: {e}");
            return 2;
        }
        if let Err(e) = append_events(&events_log, &report.method, report.seed, &report.events) {
            eprintln!("error: writing event log: {e}");
            return 2;
        }
        println!(
            "{:<13} final_error={:.6e} total_cost={:.6e} events={} converged={}",
            report.method,
            report.final_error,
            report.total_cost,
            report.events.len(),
            report.converged
        );
    }
    if config.output.format == "csv" {
        if let Err(e) = write_text(&dir.join("summary.csv"), &report::run_summary_csv(&reports)) {
            eprintln!("error: writing summary: {e}");
            return 2;
        }
    }
    println!("reports written to {}", dir.display());
    0
}

fn cmd_benchmark(
    seed: u64,
    out: Option<PathBuf>,
    format: String,
    reps: usize,
    horizons: &str,
    fixed_horizon: usize,
) -> i32 {
    let horizons = match parse_horizons(horizons) {
        Ok(h) => h,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let config = BenchmarkConfig {
        horizons,
        fixed_horizon,
        reps,
        seed,
    };
    let records = match complexity_benchmark(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let dir = out_dir(out, None);
    let result = if format == "csv" {
        write_text(&dir.join("benchmark.csv"), &report::benchmark_csv(&records))
    } else {
        write_text(
            &dir.join("benchmark.json"),
            &serde_json::to_string_pretty(&records).unwrap(),
        )
    };
    if let Err(e) = result {
        eprintln!("error: writing benchmark output: {e}");
        return 2;
    }

    for r in &records {
        let median = if r.event_micros.is_empty() {
            "-".to_string()
        } else {
            let mut xs = r.event_micros.clone();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            format!("{:.1}", xs[xs.len() / 2])
        };
        println!(
            "T={:<5} n={:<3} {:<13} event_us={:<12} total_us={:.1}",
            r.horizon, r.state_dim, r.method, median, r.total_micros
        );
    }
    // Log-log scaling of per-event time in the dimension sweep.
    for method in ["retro", "multirun_ddp"] {
        let points: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| {
                r.method == method
                    && r.horizon == config.fixed_horizon
                    && !r.event_micros.is_empty()
            })
            .map(|r| {
                let mut xs = r.event_micros.clone();
                xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                (r.state_dim as f64, xs[xs.len() / 2])
            })
            .collect();
        if points.len() >= 3 {
            println!(
                "{method}: event-time-vs-n log-log slope = {:.3}",
                fit_loglog(&points)
            );
        }
    }
    println!("benchmark table written to {}", dir.display());
    0
}

fn cmd_sweep(seed: u64, out: Option<PathBuf>, format: String, horizons: &str) -> i32 {
    let horizons = match parse_horizons(horizons) {
        Ok(h) => h,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let rows = match horizon_sweep(&horizons, seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let dir = out_dir(out, None);
    let result = if format == "csv" {
        write_text(&dir.join("sweep.csv"), &report::sweep_csv(&rows))
    } else {
        write_text(
            &dir.join("sweep.json"),
            &serde_json::to_string_pretty(&rows).unwrap(),
        )
    };
    if let Err(e) = result {
        eprintln!("error: writing sweep output: {e}");
        return 2;
    }
    for r in &rows {
        println!(
            "T={:<5} cost_diff={:.6e} total_regret={:.6e} bound={:.4} violations={} valid={}",
            r.horizon, r.cost_diff, r.total_regret, r.bound, r.violations, r.valid
        );
    }
    println!("sweep table written to {}", dir.display());
    0
}

fn cmd_check_bounds(seed: u64, out: Option<PathBuf>, instances: usize, scenarios: u64) -> i32 {
    let (normalization_violations, min_margin) = normalization_bound_sweep(instances, 64, seed);
    println!(
        "normalization bound: {instances} instances, {normalization_violations} violations, min margin {min_margin:.6}"
    );
    let summary = match regret_bound_batch(&[10, 50, 100], scenarios, seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    for (horizon, max_regret, bound, violating) in &summary.per_horizon {
        println!(
            "regret bound T={horizon}: max {max_regret:.4} <= {bound:.4}, {violating} violating scenario(s)"
        );
    }
    let dir = out_dir(out, None);
    let doc = serde_json::json!({
        "seed": seed,
        "normalization_instances": instances,
        "normalization_violations": normalization_violations,
        "normalization_min_margin": min_margin,
        "regret_scenarios": summary.scenarios,
        "regret_violations": summary.violations,
    });
    if let Err(e) = write_text(
        &dir.join("bounds.json"),
        &serde_json::to_string_pretty(&doc).unwrap(),
    ) {
        eprintln!("error: writing bounds output: {e}");
        return 2;
    }
    if normalization_violations > 0 || !summary.violations.is_empty() {
        eprintln!("bound violations detected");
        return 2;
    }
    0
}
