//! Physical states of the shuttle + registers system.
//!
//! Qubits are ordered `r1 .. rL, A, s1 .. sL`: register `r`, then the
//! shuttle, then register `s`. Register-only operators (after the shuttle has
//! been removed) use `r1 .. rL, s1 .. sL`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::densemath::{qubits_for_dim, ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Register sizes and qubit positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemLayout {
    register_size: usize,
}

/// Names one qubit of the layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QubitLabel {
    R(usize),
    Shuttle,
    S(usize),
}

impl SystemLayout {
    pub fn new(register_size: usize) -> Result<Self> {
        if register_size == 0 {
            return Err(Error::InvalidConfig(
                "register size must be at least 1".into(),
            ));
        }
        Ok(Self { register_size })
    }

    pub fn register_size(&self) -> usize {
        self.register_size
    }

    pub fn shuttle_index(&self) -> usize {
        self.register_size
    }

    pub fn total_qubits(&self) -> usize {
        2 * self.register_size + 1
    }

    pub fn register_qubit_count(&self) -> usize {
        2 * self.register_size
    }

    pub fn dim(&self) -> usize {
        1 << self.total_qubits()
    }

    /// Full-system index of `r_k` (1-based `k`).
    pub fn r(&self, k: usize) -> usize {
        assert!(k >= 1 && k <= self.register_size, "r{k} out of range");
        k - 1
    }

    /// Full-system index of `s_k` (1-based `k`).
    pub fn s(&self, k: usize) -> usize {
        assert!(k >= 1 && k <= self.register_size, "s{k} out of range");
        self.register_size + k
    }

    /// Full-system indices of all register qubits, `r` first.
    pub fn register_qubits(&self) -> Vec<usize> {
        (0..self.total_qubits())
            .filter(|&q| q != self.shuttle_index())
            .collect()
    }

    /// Full-system index for position `i` of the register-only ordering.
    pub fn register_to_full(&self, i: usize) -> usize {
        if i < self.register_size {
            i
        } else {
            i + 1
        }
    }

    pub fn is_r(&self, q: usize) -> bool {
        q < self.register_size
    }

    pub fn is_s(&self, q: usize) -> bool {
        q > self.register_size && q < self.total_qubits()
    }

    pub fn label(&self, q: usize) -> QubitLabel {
        if q < self.register_size {
            QubitLabel::R(q + 1)
        } else if q == self.register_size {
            QubitLabel::Shuttle
        } else {
            QubitLabel::S(q - self.register_size)
        }
    }

    /// Parses `r1`, `s2`, `A` into a full-system index.
    pub fn parse_label(&self, text: &str) -> Result<usize> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("a") {
            return Ok(self.shuttle_index());
        }
        let bad = || Error::InvalidConfig(format!("unknown qubit label '{text}'"));
        let mut chars = t.chars();
        let head = chars.next().ok_or_else(bad)?;
        let tail = chars.as_str();
        let k: usize = tail.parse().map_err(|_| bad())?;
        if k == 0 || k > self.register_size {
            return Err(bad());
        }
        match head {
            'r' | 'R' => Ok(self.r(k)),
            's' | 'S' => Ok(self.s(k)),
            _ => Err(bad()),
        }
    }

    /// Position of a full-system register qubit in the register-only ordering.
    pub fn full_to_register(&self, q: usize) -> Result<usize> {
        if q == self.shuttle_index() || q >= self.total_qubits() {
            return Err(Error::IndexOutOfRange {
                index: q,
                num_qubits: self.total_qubits(),
            });
        }
        Ok(if q < self.register_size { q } else { q - 1 })
    }
}

impl fmt::Display for QubitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QubitLabel::R(k) => write!(f, "r{k}"),
            QubitLabel::Shuttle => write!(f, "A"),
            QubitLabel::S(k) => write!(f, "s{k}"),
        }
    }
}

/// Normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Wraps amplitudes that are already normalized (to 1e-10).
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        qubits_for_dim(amplitudes.len())?;
        let norm = norm_sqr(&amplitudes).sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::OutOfRange {
                name: "state norm",
                value: norm,
                range: "1 +/- 1e-10",
            });
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        qubits_for_dim(amplitudes.len())?;
        let norm = norm_sqr(&amplitudes).sqrt();
        if norm == 0.0 {
            return Err(Error::OutOfRange {
                name: "state norm",
                value: 0.0,
                range: "> 0",
            });
        }
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub(crate) fn from_raw(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amplitudes).sqrt()
    }

    pub fn density(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Dimensionless temperature (energy gap 2 in units of Boltzmann's constant).
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub const ZERO: Temperature = Temperature(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::NegativeTemperature(value));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Temperature {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Temperature::new(v)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

/// Computational basis state from a bit string such as `"00100"`.
pub fn basis_state(bits: &str, num_qubits: usize) -> Result<StateVector> {
    if bits.len() != num_qubits {
        return Err(Error::LengthMismatch {
            expected: num_qubits,
            found: bits.len(),
        });
    }
    let mut index = 0usize;
    for ch in bits.chars() {
        index <<= 1;
        match ch {
            '0' => {}
            '1' => index |= 1,
            _ => return Err(Error::InvalidBits(bits.to_string())),
        }
    }
    let mut amps = vec![ZERO; 1 << num_qubits];
    amps[index] = ONE;
    Ok(StateVector::from_raw(amps))
}

/// Thermal qubit state; `|0>` is the ground state with gap 2.
pub fn gibbs_qubit(t: Temperature) -> ComplexMatrix {
    if t.0 == 0.0 {
        return ComplexMatrix::from_real_diag(&[1.0, 0.0]);
    }
    let boltz = (-2.0 / t.0).exp();
    let z = 1.0 + boltz;
    ComplexMatrix::from_real_diag(&[1.0 / z, boltz / z])
}

/// Equal superposition of all weight-one basis states of `n` qubits.
pub fn w_state(n: usize) -> Result<StateVector> {
    if n < 2 {
        return Err(Error::TooSmall(n));
    }
    let a = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    let mut amps = vec![ZERO; 1 << n];
    for k in 0..n {
        amps[1 << k] = a;
    }
    Ok(StateVector::from_raw(amps))
}

/// `<psi| rho |psi>` for a pure target.
pub fn fidelity(rho: &ComplexMatrix, psi: &StateVector) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: psi.dim(),
        });
    }
    Ok(rho.sandwich(psi.amplitudes(), psi.amplitudes()).re)
}

/// `Tr(rho^2)`.
pub fn purity(rho: &ComplexMatrix) -> f64 {
    rho.data().iter().map(|z| z.norm_sqr()).sum()
}

/// Projectors onto the subspaces of fixed total excitation number `k`,
/// for `k = 0 ..= num_qubits`.
pub fn excitation_projectors(num_qubits: usize) -> Vec<ComplexMatrix> {
    let dim = 1usize << num_qubits;
    (0..=num_qubits)
        .map(|k| {
            let diag: Vec<f64> = (0..dim)
                .map(|b| if b.count_ones() as usize == k { 1.0 } else { 0.0 })
                .collect();
            ComplexMatrix::from_real_diag(&diag)
        })
        .collect()
}

/// Largest entry of `rho` coupling different excitation numbers.
pub fn off_sector_norm(rho: &ComplexMatrix) -> f64 {
    let n = rho.dim();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r.count_ones() != c.count_ones() {
                worst = worst.max(rho[(r, c)].norm());
            }
        }
    }
    worst
}
