//! Ready-made experiments reproducing the standard figures: clean dynamics
//! with and without intra-register coupling, excitation amplitudes, missed
//! collisions, thermal registers and dephasing.

use std::path::{Path, PathBuf};

use qcollide_core::collision::{EngineConfig, Reduction, STRONG_GAMMA_INTRA};
use qcollide_core::ensemble::RecordPlan;
use qcollide_core::measures::{MeasureKind, MeasureSpec};
use qcollide_core::qstate::Temperature;

use crate::config::{ExperimentConfig, Sweep, SweepParameter};
use crate::error::{CliError, CliResult};
use crate::output::ResultRow;
use crate::runner::run_to_dir;

pub const NAMES: [&str; 6] = [
    "dynamics-strong",
    "dynamics-zero",
    "coefficients",
    "missed",
    "thermal",
    "dephasing",
];

pub const DYNAMICS_ITERATIONS: usize = 100;
pub const MISSED_ITERATIONS: usize = 200;
pub const MISSED_STRIDE: usize = 5;
pub const MISSED_P: [f64; 3] = [0.0, 0.3, 0.8];
pub const THERMAL_ITERATIONS: usize = 25;
pub const THERMAL_T1: [f64; 2] = [0.0, 1.0];
pub const DEPHASING_Q: [f64; 6] = [1.0, 0.999, 0.995, 0.99, 0.95, 0.94];

/// `T2` grid of the thermal preset: 0 to 2 in steps of 0.05.
pub fn thermal_t2_grid() -> Vec<f64> {
    (0..=40).map(|k| k as f64 * 0.05).collect()
}

/// Negativity of `r1-s1`, GMN of `r1-r2-s1` and of the whole register.
pub fn entanglement_measures(reductions: &[Reduction]) -> Vec<MeasureSpec> {
    vec![
        MeasureSpec::new(MeasureKind::Negativity, &["r1", "s1"]).with_reductions(reductions),
        MeasureSpec::new(MeasureKind::Gmn, &["r1", "r2", "s1"]).with_reductions(reductions),
        MeasureSpec::new(MeasureKind::Gmn, &[]).with_reductions(reductions),
    ]
}

const BOTH: [Reduction; 2] = [Reduction::Trace, Reduction::Project];

fn deterministic(engine: EngineConfig, measures: Vec<MeasureSpec>) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(engine, measures);
    c.realizations = 1;
    c
}

fn dynamics(gamma_intra: f64) -> ExperimentConfig {
    deterministic(
        EngineConfig::clean(2, gamma_intra, DYNAMICS_ITERATIONS),
        entanglement_measures(&BOTH),
    )
}

fn coefficients(gamma_intra: f64) -> ExperimentConfig {
    deterministic(
        EngineConfig::clean(2, gamma_intra, DYNAMICS_ITERATIONS),
        vec![
            MeasureSpec::new(MeasureKind::BCoefficients, &[]),
            MeasureSpec::new(MeasureKind::WFidelity, &[]).with_reductions(&BOTH),
        ],
    )
}

pub fn missed() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        EngineConfig::clean(2, STRONG_GAMMA_INTRA, MISSED_ITERATIONS),
        vec![MeasureSpec::new(MeasureKind::Gmn, &[]).with_reductions(&BOTH)],
    );
    c.sweep = Some(Sweep {
        parameter: SweepParameter::PMiss,
        values: MISSED_P.to_vec(),
    });
    c.record = RecordPlan::Stride(MISSED_STRIDE);
    c
}

pub fn thermal(t1: f64) -> ExperimentConfig {
    let mut engine = EngineConfig::clean(2, STRONG_GAMMA_INTRA, THERMAL_ITERATIONS);
    engine.noise.t1 = Temperature::new(t1).expect("preset temperatures are nonnegative");
    let mut c = deterministic(engine, entanglement_measures(&BOTH));
    c.sweep = Some(Sweep {
        parameter: SweepParameter::T2,
        values: thermal_t2_grid(),
    });
    c.record = RecordPlan::Iterations(vec![THERMAL_ITERATIONS]);
    c
}

pub fn dephasing() -> ExperimentConfig {
    let mut c = deterministic(
        EngineConfig::clean(2, STRONG_GAMMA_INTRA, DYNAMICS_ITERATIONS),
        entanglement_measures(&[Reduction::Project]),
    );
    c.sweep = Some(Sweep {
        parameter: SweepParameter::QDephase,
        values: DEPHASING_Q.to_vec(),
    });
    c
}

/// The experiments behind preset `name`, each with the subdirectory it is
/// written to (empty for a single experiment).
pub fn experiments(name: &str) -> CliResult<Vec<(String, ExperimentConfig)>> {
    let single = |c| Ok(vec![(String::new(), c)]);
    match name {
        "dynamics-strong" => single(dynamics(STRONG_GAMMA_INTRA)),
        "dynamics-zero" => single(dynamics(0.0)),
        "coefficients" => Ok(vec![
            ("strong".into(), coefficients(STRONG_GAMMA_INTRA)),
            ("zero".into(), coefficients(0.0)),
        ]),
        "missed" => single(missed()),
        "thermal" => Ok(THERMAL_T1
            .iter()
            .map(|&t1| (format!("t1-{t1}"), thermal(t1)))
            .collect()),
        "dephasing" => single(dephasing()),
        other => Err(CliError::UnknownPreset(other.to_string())),
    }
}

/// Runs preset `name` into `out`. `realizations` overrides the preset's
/// ensemble size.
pub fn run_preset(
    name: &str,
    out: &Path,
    seed: u64,
    realizations: Option<usize>,
) -> CliResult<Vec<(PathBuf, Vec<ResultRow>)>> {
    let mut written = Vec::new();
    for (sub, mut config) in experiments(name)? {
        if let Some(r) = realizations {
            config.realizations = r;
        }
        config.seed = Some(seed);
        let dir = if sub.is_empty() { out.to_path_buf() } else { out.join(sub) };
        let rows = run_to_dir(&config, seed, &dir)?;
        written.push((dir, rows));
    }
    Ok(written)
}
