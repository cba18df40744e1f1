//! Seeded ensembles of trajectories with missed collisions.
//!
//! By default every realization is reduced and measured on its own and the
//! measures are averaged (with their standard error). With `average_state`
//! the reduced register states are averaged first and measured once.

use serde::{Deserialize, Serialize};

use crate::collision::{
    realization_rng, reduce_project, reduce_trace, step, EngineConfig, Protocol, QuantumState,
    Reduction, RegisterState,
};
use crate::densemath::{ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::measures::{MeasureKind, MeasureSpec, ResolvedMeasure};

/// Which iterations are measured.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordPlan {
    /// Every iteration `1 ..= iterations`.
    #[default]
    Every,
    /// Iterations `k, 2k, ...` up to the horizon.
    Stride(usize),
    /// An explicit list; sorted and deduplicated before use.
    Iterations(Vec<usize>),
}

impl RecordPlan {
    pub fn resolve(&self, horizon: usize) -> Result<Vec<usize>> {
        let its: Vec<usize> = match self {
            RecordPlan::Every => (1..=horizon).collect(),
            RecordPlan::Stride(0) => {
                return Err(Error::InvalidConfig("record stride must be positive".into()))
            }
            RecordPlan::Stride(k) => (1..=horizon / k).map(|i| i * k).collect(),
            RecordPlan::Iterations(list) => {
                let mut v = list.clone();
                v.sort_unstable();
                v.dedup();
                if let Some(&bad) = v.iter().find(|&&i| i == 0 || i > horizon) {
                    return Err(Error::InvalidConfig(format!(
                        "recorded iteration {bad} is outside 1..={horizon}"
                    )));
                }
                v
            }
        };
        Ok(its)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloOptions {
    pub realizations: usize,
    pub seed: u64,
    /// Measure the averaged state instead of averaging the measures.
    pub average_state: bool,
    pub record: RecordPlan,
}

impl MonteCarloOptions {
    pub fn new(realizations: usize, seed: u64) -> Self {
        Self {
            realizations,
            seed,
            average_state: false,
            record: RecordPlan::Every,
        }
    }
}

/// One observable along the recorded iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub reduction: Reduction,
    pub measure: MeasureKind,
    pub label: String,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub iterations: Vec<usize>,
    pub series: Vec<Series>,
    pub realizations: usize,
}

impl EnsembleResult {
    pub fn series(&self, reduction: Reduction, measure: MeasureKind, label: &str) -> Option<&Series> {
        self.series
            .iter()
            .find(|s| s.reduction == reduction && s.measure == measure && s.label == label)
    }
}

/// Where each series takes its values from.
struct Slot {
    measure: usize,
    reduction: Reduction,
    value: usize,
}

/// Running mean and sum of squared deviations (Welford).
#[derive(Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.count < 2.0 {
            return 0.0;
        }
        (self.m2 / (self.count - 1.0) / self.count).max(0.0).sqrt()
    }
}

/// Runs `options.realizations` trajectories of `config` and aggregates
/// `measures` at the recorded iterations.
///
/// Realization `i` draws its skips from stream `i` of `options.seed`, so the
/// result does not depend on the order realizations are processed in. With
/// `p_miss = 0` every realization is the deterministic run; it is simulated
/// once and reported with zero standard error.
pub fn monte_carlo_run(
    config: &EngineConfig,
    measures: &[MeasureSpec],
    options: &MonteCarloOptions,
) -> Result<EnsembleResult> {
    if options.realizations == 0 {
        return Err(Error::InvalidConfig("realizations must be at least 1".into()));
    }
    let protocol = Protocol::from_config(config)?;
    let iterations = options.record.resolve(config.iterations)?;
    let resolved: Vec<ResolvedMeasure> = measures
        .iter()
        .map(|m| m.resolve(&protocol.layout))
        .collect::<Result<_>>()?;
    let mut slots = Vec::new();
    for (mi, m) in resolved.iter().enumerate() {
        for &reduction in &m.reductions {
            for value in 0..m.labels.len() {
                slots.push(Slot {
                    measure: mi,
                    reduction,
                    value,
                });
            }
        }
    }
    let deterministic = config.noise.p_miss == 0.0;
    let runs = if deterministic { 1 } else { options.realizations };

    let means_and_errors = if options.average_state {
        average_state_run(config, &protocol, &resolved, &slots, &iterations, runs, options.seed)?
    } else {
        average_measure_run(config, &protocol, &resolved, &slots, &iterations, runs, options.seed)?
    };

    let series = slots
        .iter()
        .zip(means_and_errors)
        .map(|(slot, (mean, stderr))| {
            let m = &resolved[slot.measure];
            Series {
                reduction: slot.reduction,
                measure: m.kind,
                label: m.labels[slot.value].clone(),
                mean,
                stderr,
            }
        })
        .collect();
    Ok(EnsembleResult {
        iterations,
        series,
        realizations: options.realizations,
    })
}

/// Calls `visit(realization, record_index, state)` at every recorded
/// iteration of every realization.
fn for_each_record(
    config: &EngineConfig,
    protocol: &Protocol,
    iterations: &[usize],
    runs: usize,
    seed: u64,
    mut visit: impl FnMut(usize, &QuantumState) -> Result<()>,
) -> Result<()> {
    let horizon = iterations.last().copied().unwrap_or(0);
    let initial = config.initial_state()?;
    for r in 0..runs {
        let mut rng = realization_rng(seed, r as u64);
        let mut state = initial.clone();
        let mut next = 0;
        for it in 1..=horizon {
            step(&mut state, protocol, &mut rng)?;
            if iterations[next] == it {
                visit(next, &state)?;
                next += 1;
            }
        }
    }
    Ok(())
}

fn projected(state: &QuantumState, protocol: &Protocol) -> Result<Option<(RegisterState, f64)>> {
    match reduce_project(state, &protocol.layout) {
        Ok(out) => Ok(Some(out)),
        Err(Error::ZeroProbabilityOutcome(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Values of every measure on the traced and projected states, indexed
/// `[measure][reduction][value]` with trace first.
fn evaluate_all(
    resolved: &[ResolvedMeasure],
    traced: Option<&RegisterState>,
    projected: Option<&RegisterState>,
) -> Result<Vec<[Vec<f64>; 2]>> {
    resolved
        .iter()
        .map(|m| {
            let mut out = [Vec::new(), Vec::new()];
            for &reduction in &m.reductions {
                let (idx, state) = match reduction {
                    Reduction::Trace => (0, traced),
                    Reduction::Project => (1, projected),
                };
                out[idx] = match state {
                    Some(s) => m.evaluate(s)?,
                    None => m.zeros(),
                };
            }
            Ok(out)
        })
        .collect()
}

fn slot_value(values: &[[Vec<f64>; 2]], slot: &Slot) -> f64 {
    let idx = match slot.reduction {
        Reduction::Trace => 0,
        Reduction::Project => 1,
    };
    values[slot.measure][idx][slot.value]
}

fn needs(slots: &[Slot], reduction: Reduction) -> bool {
    slots.iter().any(|s| s.reduction == reduction)
}

fn average_measure_run(
    config: &EngineConfig,
    protocol: &Protocol,
    resolved: &[ResolvedMeasure],
    slots: &[Slot],
    iterations: &[usize],
    runs: usize,
    seed: u64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let want_trace = needs(slots, Reduction::Trace);
    let want_project = needs(slots, Reduction::Project);
    let mut moments = vec![vec![Moments::default(); iterations.len()]; slots.len()];
    for_each_record(config, protocol, iterations, runs, seed, |k, state| {
        let traced = if want_trace {
            Some(RegisterState::Mixed(reduce_trace(state, &protocol.layout)?))
        } else {
            None
        };
        let proj = if want_project {
            projected(state, protocol)?.map(|(s, _)| s)
        } else {
            None
        };
        let values = evaluate_all(resolved, traced.as_ref(), proj.as_ref())?;
        for (slot, m) in slots.iter().zip(moments.iter_mut()) {
            m[k].push(slot_value(&values, slot));
        }
        Ok(())
    })?;
    Ok(moments
        .into_iter()
        .map(|ms| {
            (
                ms.iter().map(|m| m.mean).collect(),
                ms.iter().map(Moments::stderr).collect(),
            )
        })
        .collect())
}

fn accumulate(into: &mut Option<ComplexMatrix>, rho: &ComplexMatrix, weight: f64) {
    match into {
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(rho.data()) {
                *a += b * weight;
            }
        }
        None => *into = Some(rho.scale_real(weight)),
    }
}

fn average_state_run(
    config: &EngineConfig,
    protocol: &Protocol,
    resolved: &[ResolvedMeasure],
    slots: &[Slot],
    iterations: &[usize],
    runs: usize,
    seed: u64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let want_trace = needs(slots, Reduction::Trace);
    let want_project = needs(slots, Reduction::Project);
    // traced states and shuttle-ground blocks (unnormalized), summed
    let mut traced_sum: Vec<Option<ComplexMatrix>> = vec![None; iterations.len()];
    let mut ground_sum: Vec<Option<ComplexMatrix>> = vec![None; iterations.len()];
    let mut ground_prob = vec![0.0; iterations.len()];
    for_each_record(config, protocol, iterations, runs, seed, |k, state| {
        if want_trace {
            accumulate(&mut traced_sum[k], &reduce_trace(state, &protocol.layout)?, 1.0);
        }
        if want_project {
            if let Some((s, prob)) = projected(state, protocol)? {
                accumulate(&mut ground_sum[k], &s.density(), prob);
                ground_prob[k] += prob;
            }
        }
        Ok(())
    })?;
    let n = runs as f64;
    let mut columns = vec![Vec::with_capacity(iterations.len()); slots.len()];
    for k in 0..iterations.len() {
        let traced = traced_sum[k]
            .take()
            .map(|m| RegisterState::Mixed(m.scale_real(1.0 / n)));
        let proj = match ground_sum[k].take() {
            Some(m) if ground_prob[k] / n > crate::collision::MIN_PROJECTION_PROBABILITY => {
                Some(RegisterState::Mixed(m.scale(C64::new(1.0 / ground_prob[k], 0.0))))
            }
            _ => None,
        };
        let values = evaluate_all(resolved, traced.as_ref(), proj.as_ref())?;
        for (slot, col) in slots.iter().zip(columns.iter_mut()) {
            col.push(slot_value(&values, slot));
        }
    }
    // a single estimate per iteration: no spread to report
    Ok(columns
        .into_iter()
        .map(|mean| {
            let zeros = vec![0.0; mean.len()];
            (mean, zeros)
        })
        .collect())
}

/// Index of the first peak of `values`: the running maximum at the moment
/// the series first falls below `(1 - drop)` times it. `None` if that never
/// happens.
pub fn first_peak(values: &[f64], drop: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if v < (1.0 - drop) * values[b] => return Some(b),
            Some(b) if v <= values[b] => {}
            _ => best = Some(i),
        }
    }
    None
}
