use std::path::Path;
use std::time::Instant;

use qcollide_core::ensemble::{monte_carlo_run, MonteCarloOptions};

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::output::{write_outputs, Manifest, ResultRow, CSV_SCHEMA_VERSION};

/// Runs every sweep point of `config` and returns the table rows in order.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> CliResult<Vec<ResultRow>> {
    config.validate()?;
    let options = MonteCarloOptions {
        realizations: config.realizations,
        seed,
        average_state: config.average_state,
        record: config.record.clone(),
    };
    let sweep_parameter = config
        .sweep
        .as_ref()
        .map(|s| s.parameter.as_str().to_string())
        .unwrap_or_default();
    let mut rows = Vec::new();
    for (value, engine) in config.points()? {
        let result = monte_carlo_run(&engine, &config.measures, &options)?;
        for series in &result.series {
            for (k, &iteration) in result.iterations.iter().enumerate() {
                rows.push(ResultRow {
                    schema_version: CSV_SCHEMA_VERSION,
                    iteration,
                    reduction: series.reduction.to_string(),
                    measure: series.measure.to_string(),
                    subset: series.label.clone(),
                    sweep_parameter: sweep_parameter.clone(),
                    sweep_value: value,
                    mean: series.mean[k],
                    stderr: series.stderr[k],
                    realizations: result.realizations,
                });
            }
        }
    }
    rows.sort_by(ResultRow::table_order);
    Ok(rows)
}

/// Runs `config` and writes `results.csv` and `manifest.json` into `out`.
pub fn run_to_dir(config: &ExperimentConfig, seed: u64, out: &Path) -> CliResult<Vec<ResultRow>> {
    let start = Instant::now();
    let rows = run_experiment(config, seed)?;
    let manifest = Manifest::new(config, seed, rows.len(), start.elapsed().as_secs_f64());
    write_outputs(out, &rows, &manifest)?;
    Ok(rows)
}
