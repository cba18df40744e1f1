use crate::error::{CliError, CliResult};

/// Dephasing parameter per collision of duration `t` for a qubit with
/// coherence time `t2`: `(exp(-t / (2 t2)) + 1) / 2`.
pub fn q_from_t2(t: f64, t2: f64) -> CliResult<f64> {
    if !(t2 > 0.0) {
        return Err(CliError::NonpositiveT2(t2));
    }
    if !(t >= 0.0) {
        return Err(CliError::NegativeTime(t));
    }
    Ok(((-t / (2.0 * t2)).exp() + 1.0) / 2.0)
}
