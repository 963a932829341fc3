//! Sweep orchestration and result files.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::runner::{run_cell, CellOutcome, Instance, ResultRecord, TraceRow};
use crate::HarnessError;

/// All cells of a sweep in `(sweep value, seed)` order.
pub struct SweepOutput {
    pub cells: Vec<CellOutcome>,
    /// Cells whose channels could not be generated.
    pub failures: Vec<(f64, u64, String)>,
}

impl SweepOutput {
    pub fn records(&self) -> impl Iterator<Item = &ResultRecord> {
        self.cells.iter().flat_map(|c| c.records.iter())
    }

    pub fn traces(&self) -> impl Iterator<Item = &TraceRow> {
        self.cells.iter().flat_map(|c| c.traces.iter())
    }

    /// Results table; the runtime column is left empty when
    /// `with_runtime` is false so that reruns compare byte for byte.
    pub fn results_csv(&self, with_runtime: bool) -> String {
        let mut out = String::from(ResultRecord::CSV_HEADER);
        out.push('\n');
        for r in self.records() {
            out.push_str(&r.csv_row(with_runtime));
            out.push('\n');
        }
        out
    }

    pub fn traces_csv(&self) -> String {
        let mut out = String::from(TraceRow::CSV_HEADER);
        out.push('\n');
        for t in self.traces() {
            out.push_str(&t.csv_row());
            out.push('\n');
        }
        out
    }
}

/// Runs every `(sweep value, seed)` cell on a pool of `jobs` threads (all
/// cores when `None`).
pub fn sweep(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<SweepOutput, HarnessError> {
    cfg.validate()?;
    let seeds = cfg.seeds.values();
    let cells: Vec<(usize, f64, usize, f64, u64)> = cfg
        .points()
        .into_iter()
        .zip(&cfg.sweep.values)
        .enumerate()
        .flat_map(|(i, ((m, p), &v))| seeds.iter().map(move |&s| (i, v, m, p, s)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| HarnessError::Io(e.to_string()))?;
    let mut results: Vec<(usize, u64, Result<CellOutcome, String>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, v, m, p, s)| {
                let cell = Instance::generate(cfg, m, p, s)
                    .map(|inst| run_cell(cfg, v, inst))
                    .map_err(|e| e.to_string());
                (i, s, cell)
            })
            .collect()
    });
    results.sort_by_key(|(i, s, _)| (*i, *s));
    let mut out = SweepOutput {
        cells: Vec::new(),
        failures: Vec::new(),
    };
    for (i, s, r) in results {
        match r {
            Ok(c) => out.cells.push(c),
            Err(e) => out.failures.push((cfg.sweep.values[i], s, e)),
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    config_sha256: String,
    package: &'static str,
    version: &'static str,
    seeds: Vec<u64>,
    sweep_axis: crate::config::SweepAxis,
    sweep_values: &'a [f64],
    methods: Vec<&'static str>,
    cells: usize,
    records: usize,
    failures: Vec<String>,
    files: [&'static str; 3],
}

/// Writes `results.csv`, `traces.csv`, `config.toml` and `manifest.json`.
pub fn write_outputs(cfg: &ExperimentConfig, out: &SweepOutput, dir: &Path) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    fs::write(dir.join("results.csv"), out.results_csv(true)).map_err(io)?;
    fs::write(dir.join("traces.csv"), out.traces_csv()).map_err(io)?;
    fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(io)?;
    let manifest = Manifest {
        name: &cfg.name,
        config_sha256: cfg.hash(),
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seeds: cfg.seeds.values(),
        sweep_axis: cfg.sweep.axis,
        sweep_values: &cfg.sweep.values,
        methods: cfg.methods.iter().map(|m| m.label()).collect(),
        cells: out.cells.len(),
        records: out.records().count(),
        failures: out.failures.iter().map(|(v, s, e)| format!("value {v}, seed {s}: {e}")).collect(),
        files: ["results.csv", "traces.csv", "config.toml"],
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join("manifest.json"), json).map_err(io)?;
    Ok(())
}
