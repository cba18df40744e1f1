//! Experiment description: engine settings, measures, an optional
//! one-parameter sweep and the ensemble size.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qcollide_core::collision::EngineConfig;
use qcollide_core::ensemble::RecordPlan;
use qcollide_core::measures::MeasureSpec;
use qcollide_core::qstate::Temperature;

use crate::error::{CliError, CliResult};

pub const DEFAULT_REALIZATIONS: usize = 500;
pub const DEFAULT_SEED: u64 = 20_240_611;
pub const SEED_ENV: &str = "QCOLLIDE_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    PMiss,
    QDephase,
    T1,
    T2,
}

impl SweepParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParameter::PMiss => "p_miss",
            SweepParameter::QDephase => "q_dephase",
            SweepParameter::T1 => "t1",
            SweepParameter::T2 => "t2",
        }
    }

    /// `engine` with this parameter set to `value`.
    pub fn apply(&self, engine: &EngineConfig, value: f64) -> CliResult<EngineConfig> {
        let mut e = engine.clone();
        let temperature =
            |v: f64| Temperature::new(v).map_err(|err| CliError::config("sweep.values", err.to_string()));
        match self {
            SweepParameter::PMiss => e.noise.p_miss = value,
            SweepParameter::QDephase => e.noise.q_dephase = value,
            SweepParameter::T1 => e.noise.t1 = temperature(value)?,
            SweepParameter::T2 => e.noise.t2 = temperature(value)?,
        }
        Ok(e)
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub engine: EngineConfig,
    pub measures: Vec<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    /// Falls back to `QCOLLIDE_SEED`, then to a fixed default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Measure the ensemble-averaged state instead of averaging measures.
    #[serde(default)]
    pub average_state: bool,
    #[serde(default)]
    pub record: RecordPlan,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_realizations() -> usize {
    DEFAULT_REALIZATIONS
}

impl ExperimentConfig {
    pub fn new(engine: EngineConfig, measures: Vec<MeasureSpec>) -> Self {
        Self {
            engine,
            measures,
            sweep: None,
            realizations: DEFAULT_REALIZATIONS,
            seed: None,
            average_state: false,
            record: RecordPlan::Every,
            format: OutputFormat::Csv,
        }
    }

    /// Engine settings at every sweep point, with the sweep value (if any).
    pub fn points(&self) -> CliResult<Vec<(Option<f64>, EngineConfig)>> {
        match &self.sweep {
            None => Ok(vec![(None, self.engine.clone())]),
            Some(s) => s
                .values
                .iter()
                .map(|&v| Ok((Some(v), s.parameter.apply(&self.engine, v)?)))
                .collect(),
        }
    }

    /// Checks everything that can be checked without running: engine ranges
    /// at every sweep point, subsets against the layout, the record plan.
    pub fn validate(&self) -> CliResult<()> {
        let wrap = |path: String| move |e: qcollide_core::Error| CliError::config(path.clone(), e.to_string());
        self.engine.validate().map_err(wrap("engine".into()))?;
        let layout = self.engine.layout().map_err(wrap("engine.register_size".into()))?;
        if self.measures.is_empty() {
            return Err(CliError::config("measures", "at least one measure is required"));
        }
        for (i, m) in self.measures.iter().enumerate() {
            m.resolve(&layout).map_err(wrap(format!("measures[{i}]")))?;
        }
        if self.realizations == 0 {
            return Err(CliError::config("realizations", "must be at least 1"));
        }
        self.record
            .resolve(self.engine.iterations)
            .map_err(wrap("record".into()))?;
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(CliError::config("sweep.values", "sweep grid is empty"));
            }
            for (i, &v) in s.values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(CliError::config(format!("sweep.values[{i}]"), "not a finite number"));
                }
                s.parameter
                    .apply(&self.engine, v)?
                    .validate()
                    .map_err(wrap(format!("sweep.values[{i}]")))?;
            }
        }
        Ok(())
    }

    /// The seed actually used: the config's own, else `env_seed`, else the
    /// default.
    pub fn resolved_seed(&self, env_seed: Option<u64>) -> u64 {
        self.seed.or(env_seed).unwrap_or(DEFAULT_SEED)
    }
}

/// Reads the seed fallback from the environment.
pub fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::config(SEED_ENV, format!("'{s}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Parses a config document. A manifest written by an earlier run is
/// accepted too and yields the configuration it echoes.
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::config(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    let (value, prefix) = match value.get("config") {
        Some(inner) if value.get("manifest_version").is_some() => (inner.clone(), "config."),
        _ => (value, ""),
    };
    let config: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { prefix.trim_end_matches('.').to_string() } else { format!("{prefix}{path}") };
        CliError::config(if path.is_empty() { "(root)".into() } else { path }, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "engine": {"register_size": 2, "iterations": 3},
        "measures": [{"measure": "negativity", "subset": ["r1", "s1"]}]
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.realizations, DEFAULT_REALIZATIONS);
        assert_eq!(c.engine.gamma_shuttle, 0.05);
        assert_eq!(c.record, RecordPlan::Every);
        assert_eq!(c.resolved_seed(None), DEFAULT_SEED);
        assert_eq!(c.resolved_seed(Some(4)), 4);
    }

    #[test]
    fn errors_name_the_offending_field() {
        let bad = MINIMAL.replace("\"iterations\": 3", "\"iterations\": \"three\"");
        match parse_config(&bad).unwrap_err() {
            CliError::Config { path, .. } => assert_eq!(path, "engine.iterations"),
            e => panic!("{e}"),
        }
        let bad = MINIMAL.replace("\"s1\"", "\"s3\"");
        match parse_config(&bad).unwrap_err() {
            CliError::Config { path, .. } => assert_eq!(path, "measures[0]"),
            e => panic!("{e}"),
        }
        let bad = MINIMAL.replace("\"engine\"", "\"sweep\": {\"parameter\": \"q_dephase\", \"values\": []}, \"engine\"");
        match parse_config(&bad).unwrap_err() {
            CliError::Config { path, .. } => assert_eq!(path, "sweep.values"),
            e => panic!("{e}"),
        }
        let bad = MINIMAL.replace("\"engine\"", "\"sweep\": {\"parameter\": \"q_dephase\", \"values\": [0.2]}, \"engine\"");
        assert!(matches!(parse_config(&bad), Err(CliError::Config { .. })));
        let bad = MINIMAL.replace("\"engine\"", "\"colour\": 1, \"engine\"");
        assert!(matches!(parse_config(&bad), Err(CliError::Config { .. })));
    }

    #[test]
    fn sweep_sets_the_named_parameter() {
        let engine = EngineConfig::clean(2, 0.0, 4);
        let e = SweepParameter::T2.apply(&engine, 0.7).unwrap();
        assert_eq!(e.noise.t2.value(), 0.7);
        let e = SweepParameter::PMiss.apply(&engine, 0.3).unwrap();
        assert_eq!(e.noise.p_miss, 0.3);
        assert!(SweepParameter::T1.apply(&engine, -1.0).is_err());
    }
}
