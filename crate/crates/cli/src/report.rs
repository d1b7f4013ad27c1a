//! Result files: `results.csv`, `results.json`, `traces.csv` and, for
//! sweeps, `sweep.csv`. Rows are ordered by query id.

use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::runner::{Params, QueryRecord, ResultsRecord, SweepPoint};

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const TRACES_CSV: &str = "traces.csv";
pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct JsonReport<'a> {
    config: &'a ExperimentConfig,
    total: usize,
    correct: usize,
    rate: f64,
    best_params: Option<Params>,
    queries: &'a [QueryRecord],
    sweep: &'a [SweepPoint],
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_results_csv(results: &ResultsRecord, path: &Path) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv_writer(path)?;
    w.write_record(["queryId", "trueClass", "predictedClass", "correct", "iterations", "wallTimeMs"])
        .map_err(&err)?;
    for q in &results.queries {
        let wall = if results.config.record_wall_time {
            format!("{:.3}", q.wall_time_ms)
        } else {
            String::new()
        };
        w.write_record([
            q.query_id.to_string(),
            q.true_class.to_string(),
            q.predicted_class.to_string(),
            u8::from(q.correct).to_string(),
            q.iterations.to_string(),
            wall,
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One row per iteration: `queryId,iteration,dual`, iterations from 1.
pub fn write_traces_csv(results: &ResultsRecord, path: &Path) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv_writer(path)?;
    w.write_record(["queryId", "iteration", "dual"]).map_err(&err)?;
    for q in &results.queries {
        for (i, d) in q.trace.iter().enumerate() {
            w.write_record([q.query_id.to_string(), (i + 1).to_string(), d.to_string()])
                .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_sweep_csv(results: &ResultsRecord, path: &Path) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv_writer(path)?;
    w.write_record(["omega", "alpha", "beta", "correct", "total", "rate"])
        .map_err(&err)?;
    for s in &results.sweep {
        w.write_record([
            s.params.omega.to_string(),
            s.params.alpha.to_string(),
            s.params.beta.to_string(),
            s.correct.to_string(),
            s.total.to_string(),
            s.rate.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_results_json(results: &ResultsRecord, path: &Path) -> Result<()> {
    let report = JsonReport {
        config: &results.config,
        total: results.total(),
        correct: results.correct(),
        rate: results.rate(),
        best_params: results.best,
        queries: &results.queries,
        sweep: &results.sweep,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_all(results: &ResultsRecord, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_results_csv(results, &dir.join(RESULTS_CSV))?;
    write_results_json(results, &dir.join(RESULTS_JSON))?;
    write_traces_csv(results, &dir.join(TRACES_CSV))?;
    if !results.sweep.is_empty() {
        write_sweep_csv(results, &dir.join(SWEEP_CSV))?;
    }
    Ok(())
}
