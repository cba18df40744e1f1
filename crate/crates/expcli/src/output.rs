//! Result rows, the CSV table and the run manifest.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Bumped whenever the column set or meaning changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;
pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub iteration: usize,
    pub reduction: String,
    pub measure: String,
    pub subset: String,
    /// Empty when the experiment has no sweep.
    pub sweep_parameter: String,
    pub sweep_value: Option<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub realizations: usize,
}

impl ResultRow {
    /// Order of rows in the table: sweep value, iteration, measure, subset,
    /// then reduction.
    pub fn table_order(&self, other: &Self) -> Ordering {
        let sweep = match (self.sweep_value, other.sweep_value) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            (a, b) => a.is_some().cmp(&b.is_some()),
        };
        sweep
            .then(self.iteration.cmp(&other.iteration))
            .then_with(|| self.measure.cmp(&other.measure))
            .then_with(|| self.subset.cmp(&other.subset))
            .then_with(|| self.reduction.cmp(&other.reduction))
    }
}

pub fn write_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io(RESULTS_FILE, e))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> CliResult<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub csv_schema_version: u32,
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub rows: usize,
    /// The configuration as run, seed included; loading this file as a
    /// config repeats the run.
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, seed: u64, rows: usize, wall_time_seconds: f64) -> Self {
        let mut config = config.clone();
        config.seed = Some(seed);
        Self {
            manifest_version: MANIFEST_VERSION,
            csv_schema_version: CSV_SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            wall_time_seconds,
            rows,
            config,
        }
    }
}

/// Writes `results.csv` and `manifest.json` into `dir`, creating it.
pub fn write_outputs(dir: &Path, rows: &[ResultRow], manifest: &Manifest) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let csv_path = dir.join(RESULTS_FILE);
    let file = fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    write_csv(rows, std::io::BufWriter::new(file))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text).map_err(|e| CliError::io(&manifest_path, e))?;
    Ok(())
}
