//! Experiment execution, aggregation and reporting.
//!
//! A single run produces a [`RunRecord`]; runs grouped by
//! (scenario, planner, mode) aggregate into mean +/- population standard
//! deviation rows. All output is deterministic: repeated invocations with
//! the same inputs produce byte-identical files.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::explorer::{run_exploration, ExplorerConfig, RunLog, SeriesPoint, Variant};
use crate::scenarios;
use daep_core::Real;

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: String,
    pub variant: Variant,
    /// True: obstacles move along their paths. False: they are removed.
    pub dynamic: bool,
    pub start_index: usize,
    pub seed: u64,
    /// Mission cutoff [s].
    pub time_limit: Real,
}

impl RunConfig {
    pub fn mode_name(&self) -> &'static str {
        if self.dynamic {
            "dynamic"
        } else {
            "static"
        }
    }
}

/// One completed run with its configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub planner: String,
    pub mode: String,
    pub start_index: usize,
    pub seed: u64,
    pub time_limit: Real,
    pub log: RunLog,
}

impl RunRecord {
    /// Stable identifier used in output file names.
    pub fn stem(&self) -> String {
        format!(
            "{}_{}_{}_s{}_r{}",
            self.scenario, self.planner, self.mode, self.start_index, self.seed
        )
    }
}

/// Execute one run on a named scenario.
pub fn run_experiment(cfg: &RunConfig, explorer: &ExplorerConfig) -> Result<RunRecord> {
    let scenario = scenarios::by_name(&cfg.scenario)?;
    let log = run_exploration(
        &scenario,
        cfg.variant,
        cfg.dynamic,
        cfg.start_index,
        cfg.seed,
        cfg.time_limit,
        explorer,
    )?;
    Ok(RunRecord {
        scenario: cfg.scenario.clone(),
        planner: cfg.variant.name().to_string(),
        mode: cfg.mode_name().to_string(),
        start_index: cfg.start_index,
        seed: cfg.seed,
        time_limit: cfg.time_limit,
        log,
    })
}

/// Mean +/- population standard deviation of the run metrics in one
/// (scenario, planner, mode) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scenario: String,
    pub planner: String,
    pub mode: String,
    pub runs: usize,
    pub coverage_mean: Real,
    pub coverage_std: Real,
    pub time_mean: Real,
    pub time_std: Real,
    pub path_length_mean: Real,
    pub path_length_std: Real,
    pub planning_time_mean: Real,
    pub planning_time_std: Real,
    pub collisions_mean: Real,
    pub collisions_std: Real,
    pub finished_runs: usize,
}

/// Mean and population standard deviation.
fn mean_std(xs: &[Real]) -> (Real, Real) {
    let n = xs.len() as Real;
    let mean = xs.iter().sum::<Real>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<Real>() / n;
    (mean, var.max(0.0).sqrt())
}

/// Group records and reduce each group. Output is sorted by
/// (scenario, planner, mode) so repeated aggregation is byte-stable.
pub fn aggregate(records: &[RunRecord]) -> Result<Vec<AggregateRow>> {
    if records.is_empty() {
        return Err(BenchError::Config("no records to aggregate".into()));
    }
    let mut groups: BTreeMap<(String, String, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.scenario.clone(), r.planner.clone(), r.mode.clone()))
            .or_default()
            .push(r);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for ((scenario, planner, mode), group) in groups {
        let collect = |f: &dyn Fn(&RunLog) -> Real| -> Vec<Real> {
            group.iter().map(|r| f(&r.log)).collect()
        };
        let (coverage_mean, coverage_std) = mean_std(&collect(&|l| l.coverage_percent));
        let (time_mean, time_std) = mean_std(&collect(&|l| l.exploration_time));
        let (path_length_mean, path_length_std) = mean_std(&collect(&|l| l.path_length));
        let (planning_time_mean, planning_time_std) = mean_std(&collect(&|l| l.planning_time));
        let (collisions_mean, collisions_std) = mean_std(&collect(&|l| l.collisions as Real));
        rows.push(AggregateRow {
            scenario,
            planner,
            mode,
            runs: group.len(),
            coverage_mean,
            coverage_std,
            time_mean,
            time_std,
            path_length_mean,
            path_length_std,
            planning_time_mean,
            planning_time_std,
            collisions_mean,
            collisions_std,
            finished_runs: group.iter().filter(|r| r.log.finished).count(),
        });
    }
    Ok(rows)
}

/// Write the aggregate table as CSV with a header row.
pub fn write_summary_csv<W: Write>(rows: &[AggregateRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)
            .map_err(|e| BenchError::Serialize(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parse a summary CSV written by [`write_summary_csv`].
pub fn read_summary_csv<R: Read>(r: R) -> Result<Vec<AggregateRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec.map_err(|e| BenchError::Serialize(e.to_string()))?);
    }
    Ok(rows)
}

/// Write one run's coverage/path-length time series as CSV.
pub fn write_series_csv<W: Write>(series: &[SeriesPoint], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for p in series {
        wtr.serialize(p)
            .map_err(|e| BenchError::Serialize(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Serialize run records as pretty JSON (stable field and element order).
pub fn write_records_json<W: Write>(records: &[RunRecord], mut w: W) -> Result<()> {
    let text = serde_json::to_string_pretty(records)
        .map_err(|e| BenchError::Serialize(e.to_string()))?;
    w.write_all(text.as_bytes())?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Parse records written by [`write_records_json`].
pub fn read_records_json<R: Read>(mut r: R) -> Result<Vec<RunRecord>> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    serde_json::from_str(&text).map_err(|e| BenchError::Serialize(e.to_string()))
}
