//! Observables recorded along a trajectory: entanglement of register
//! subsets, overlap with the W state and the single-excitation amplitudes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::collision::{extract_w_coefficients, Reduction, RegisterState};
use crate::densemath::ComplexMatrix;
use crate::entanglement::{gmn, negativity, verify_witness, Bipartition};
use crate::error::{Error, Result};
use crate::qstate::{fidelity, w_state, SystemLayout};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    /// Negativity between the two qubits of the subset.
    Negativity,
    /// Genuine multipartite negativity of the subset (2 to 4 qubits).
    Gmn,
    /// Fidelity of the reduced state with the W state of the subset.
    WFidelity,
    /// `|b_j|` of the projected register state, one value per subset qubit.
    BCoefficients,
}

impl MeasureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MeasureKind::Negativity => "negativity",
            MeasureKind::Gmn => "gmn",
            MeasureKind::WFidelity => "w_fidelity",
            MeasureKind::BCoefficients => "b_coefficients",
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One configured observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub measure: MeasureKind,
    /// Register qubit labels (`r1`, `s2`, ...); empty selects every register
    /// qubit.
    #[serde(default)]
    pub subset: Vec<String>,
    /// Reductions to evaluate on; empty means both where defined
    /// (`b_coefficients` only exists after projection).
    #[serde(default)]
    pub reductions: Vec<Reduction>,
}

impl MeasureSpec {
    pub fn new(measure: MeasureKind, subset: &[&str]) -> Self {
        Self {
            measure,
            subset: subset.iter().map(|s| s.to_string()).collect(),
            reductions: Vec::new(),
        }
    }

    pub fn with_reductions(mut self, reductions: &[Reduction]) -> Self {
        self.reductions = reductions.to_vec();
        self
    }

    /// Checks the subset against `layout` and fixes the evaluation plan.
    pub fn resolve(&self, layout: &SystemLayout) -> Result<ResolvedMeasure> {
        let mut qubits = Vec::new();
        if self.subset.is_empty() {
            qubits.extend(0..layout.register_qubit_count());
        } else {
            for label in &self.subset {
                let full = layout.parse_label(label)?;
                let q = layout.full_to_register(full).map_err(|_| {
                    Error::InvalidConfig(format!("'{label}' is not a register qubit"))
                })?;
                if qubits.contains(&q) {
                    return Err(Error::InvalidConfig(format!(
                        "qubit '{label}' listed twice in a subset"
                    )));
                }
                qubits.push(q);
            }
            qubits.sort_unstable();
        }
        let n = qubits.len();
        let size_ok = match self.measure {
            MeasureKind::Negativity => n == 2,
            MeasureKind::Gmn => (2..=4).contains(&n),
            MeasureKind::WFidelity => n >= 2,
            MeasureKind::BCoefficients => n >= 1,
        };
        if !size_ok {
            let need = match self.measure {
                MeasureKind::Negativity => "exactly 2",
                MeasureKind::Gmn => "2 to 4",
                MeasureKind::WFidelity => "at least 2",
                MeasureKind::BCoefficients => "at least 1",
            };
            return Err(Error::InvalidConfig(format!(
                "{} needs {need} qubits, got {n}",
                self.measure
            )));
        }
        let reductions = if self.reductions.is_empty() {
            match self.measure {
                MeasureKind::BCoefficients => vec![Reduction::Project],
                _ => vec![Reduction::Trace, Reduction::Project],
            }
        } else {
            let mut r = self.reductions.clone();
            r.sort();
            r.dedup();
            if self.measure == MeasureKind::BCoefficients && r.contains(&Reduction::Trace) {
                return Err(Error::InvalidConfig(
                    "b_coefficients are only defined after projection".into(),
                ));
            }
            r
        };
        let names: Vec<String> = qubits
            .iter()
            .map(|&q| layout.label(layout.register_to_full(q)).to_string())
            .collect();
        let labels = match self.measure {
            MeasureKind::BCoefficients => names,
            _ => vec![names.join("-")],
        };
        Ok(ResolvedMeasure {
            kind: self.measure,
            qubits,
            reductions,
            labels,
            register_qubits: layout.register_qubit_count(),
        })
    }
}

/// A measure bound to a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedMeasure {
    pub kind: MeasureKind,
    /// Positions in the register-only qubit ordering, ascending.
    pub qubits: Vec<usize>,
    pub reductions: Vec<Reduction>,
    /// One label per produced value.
    pub labels: Vec<String>,
    register_qubits: usize,
}

impl ResolvedMeasure {
    fn reduced(&self, state: &RegisterState) -> Result<ComplexMatrix> {
        if self.qubits.len() == self.register_qubits {
            return Ok(state.density());
        }
        state.reduced(&self.qubits)
    }

    /// Values for one register state, in the order of [`Self::labels`].
    /// GMN witnesses are re-verified before their value is accepted.
    pub fn evaluate(&self, state: &RegisterState) -> Result<Vec<f64>> {
        match self.kind {
            MeasureKind::Negativity => {
                let rho = self.reduced(state)?;
                Ok(vec![negativity(&rho, &Bipartition::new(&[0], 2)?)?])
            }
            MeasureKind::Gmn => {
                let rho = self.reduced(state)?;
                let sol = gmn(&rho)?;
                verify_witness(&sol, &rho)?;
                Ok(vec![sol.gmn_value])
            }
            MeasureKind::WFidelity => {
                let rho = self.reduced(state)?;
                Ok(vec![fidelity(&rho, &w_state(self.qubits.len())?)?])
            }
            MeasureKind::BCoefficients => {
                let b = extract_w_coefficients(state)?;
                // b_j sits on bit j, i.e. register position n - 1 - j.
                let n = self.register_qubits;
                Ok(self.qubits.iter().map(|&q| b.magnitudes[n - 1 - q]).collect())
            }
        }
    }

    /// Zeros standing in for values of an outcome that never occurs.
    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.labels.len()]
    }
}
