//! Benchmark CLI.
//!
//! `daep run`     — execute one exploration run and write its record + series.
//! `daep sweep`   — execute a suite of runs described by a TOML file.
//! `daep report`  — aggregate previously written run records into a summary.
//!
//! Output directory resolution: `--out` flag, else the `DAEP_OUTPUT_ROOT`
//! environment variable, else `./daep-out`.
//!
//! File formats:
//! - run records: JSON array of records (config + metrics + series);
//! - `summary.csv`: one aggregate row per (scenario, planner, mode) with
//!   mean and population standard deviation per metric;
//! - `summary.json`: the same rows as JSON;
//! - `series/<stem>.csv`: `t,coverage,path_length` per sample.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use daep_bench::error::{BenchError, Result};
use daep_bench::explorer::{ExplorerConfig, Variant};
use daep_bench::metrics::{
    aggregate, read_records_json, run_experiment, write_records_json, write_series_csv,
    write_summary_csv, RunConfig, RunRecord,
};
use daep_bench::scenarios;

#[derive(Parser)]
#[command(name = "daep", about = "Exploration planner benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a single exploration run.
    Run(RunArgs),
    /// Execute every run in a suite file.
    Sweep(SweepArgs),
    /// Aggregate run records into a summary table.
    Report(ReportArgs),
    /// List the built-in scenarios.
    Scenarios,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name (see `daep scenarios`).
    #[arg(long)]
    scenario: String,
    /// Planner variant: daep, daep-no-predict, daep-no-dfm, static-aep-like.
    #[arg(long, default_value = "daep")]
    planner: String,
    /// Obstacle mode: dynamic or static.
    #[arg(long, default_value = "dynamic")]
    mode: String,
    /// Start pose index (0..4).
    #[arg(long, default_value_t = 0)]
    start: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Mission cutoff in seconds.
    #[arg(long, default_value_t = 1200.0)]
    time_limit: f64,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML suite description.
    #[arg(long)]
    suite: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory containing record JSON files, or a single records file.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Suite file schema.
///
/// ```toml
/// time_limit = 1200.0
/// seeds = [1, 2, 3, 4, 5]
///
/// [[runs]]
/// scenario = "cafe"
/// planner = "daep"
/// mode = "dynamic"
/// starts = [0, 1, 2, 3, 4]
/// ```
#[derive(Deserialize)]
struct SweepSpec {
    #[serde(default = "default_time_limit")]
    time_limit: f64,
    #[serde(default = "default_seeds")]
    seeds: Vec<u64>,
    runs: Vec<SweepEntry>,
}

fn default_time_limit() -> f64 {
    1200.0
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

#[derive(Deserialize)]
struct SweepEntry {
    scenario: String,
    planner: String,
    mode: String,
    #[serde(default = "default_starts")]
    starts: Vec<usize>,
}

fn default_starts() -> Vec<usize> {
    vec![0]
}

fn parse_mode(s: &str) -> Result<bool> {
    match s {
        "dynamic" => Ok(true),
        "static" => Ok(false),
        other => Err(BenchError::Config(format!(
            "unknown mode '{other}'; expected 'dynamic' or 'static'"
        ))),
    }
}

fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("DAEP_OUTPUT_ROOT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("daep-out"))
}

fn write_outputs(out: &Path, records: &[RunRecord]) -> Result<()> {
    fs::create_dir_all(out.join("series"))?;
    let f = fs::File::create(out.join("records.json"))?;
    write_records_json(records, f)?;
    for rec in records {
        let f = fs::File::create(out.join("series").join(format!("{}.csv", rec.stem())))?;
        write_series_csv(&rec.log.series, f)?;
    }
    let rows = aggregate(records)?;
    write_summary_csv(&rows, fs::File::create(out.join("summary.csv"))?)?;
    let json = serde_json::to_string_pretty(&rows).map_err(|e| BenchError::Serialize(e.to_string()))?;
    fs::write(out.join("summary.json"), json + "\n")?;
    Ok(())
}

fn print_record(rec: &RunRecord) {
    println!(
        "{}: C={:.2}% T={:.1}s PL={:.1}m PT={:.1}s NOC={} finished={}",
        rec.stem(),
        rec.log.coverage_percent,
        rec.log.exploration_time,
        rec.log.path_length,
        rec.log.planning_time,
        rec.log.collisions,
        rec.log.finished,
    );
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = RunConfig {
        scenario: args.scenario,
        variant: Variant::parse(&args.planner)?,
        dynamic: parse_mode(&args.mode)?,
        start_index: args.start,
        seed: args.seed,
        time_limit: args.time_limit,
    };
    let rec = run_experiment(&cfg, &ExplorerConfig::default())?;
    print_record(&rec);
    write_outputs(&output_root(args.out), std::slice::from_ref(&rec))
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&args.suite)?;
    let spec: SweepSpec =
        toml::from_str(&text).map_err(|e| BenchError::Config(format!("suite: {e}")))?;
    let explorer = ExplorerConfig::default();
    let mut records = Vec::new();
    for entry in &spec.runs {
        let variant = Variant::parse(&entry.planner)?;
        let dynamic = parse_mode(&entry.mode)?;
        for &start in &entry.starts {
            for &seed in &spec.seeds {
                let cfg = RunConfig {
                    scenario: entry.scenario.clone(),
                    variant,
                    dynamic,
                    start_index: start,
                    seed,
                    time_limit: spec.time_limit,
                };
                let rec = run_experiment(&cfg, &explorer)?;
                print_record(&rec);
                records.push(rec);
            }
        }
    }
    write_outputs(&output_root(args.out), &records)
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    let mut files = Vec::new();
    if args.input.is_dir() {
        for entry in fs::read_dir(&args.input)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                files.push(path);
            }
        }
        files.sort();
    } else {
        files.push(args.input.clone());
    }
    for path in files {
        records.extend(read_records_json(fs::File::open(&path)?)?);
    }
    let out = output_root(args.out);
    fs::create_dir_all(&out)?;
    let rows = aggregate(&records)?;
    write_summary_csv(&rows, fs::File::create(out.join("summary.csv"))?)?;
    let json = serde_json::to_string_pretty(&rows).map_err(|e| BenchError::Serialize(e.to_string()))?;
    fs::write(out.join("summary.json"), json + "\n")?;
    for row in &rows {
        println!(
            "{} {} {} (n={}): C={:.2}+/-{:.2}% T={:.1}+/-{:.1}s NOC={:.2}+/-{:.2}",
            row.scenario,
            row.planner,
            row.mode,
            row.runs,
            row.coverage_mean,
            row.coverage_std,
            row.time_mean,
            row.time_std,
            row.collisions_mean,
            row.collisions_std,
        );
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Report(args) => cmd_report(args),
        Command::Scenarios => {
            for name in scenarios::SCENARIO_NAMES {
                println!("{name}");
            }
            Ok(())
        }
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
