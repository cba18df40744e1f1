//! Negativity across a bipartition and genuine multipartite negativity.
//!
//! The multipartite measure is the optimum of
//!
//! ```text
//! min Tr(W rho)  s.t.  W = P_M + Q_M^{T_M},  0 <= P_M <= I,  0 <= Q_M <= I
//! ```
//!
//! over every bipartition `M`, reported as `max(0, -optimum)`.
//!
//! States that commute with the total excitation number admit an optimal
//! witness with the same symmetry, which cuts the program into sector blocks;
//! when a local phase change also makes the state real the witness can be
//! taken real as well. Both reductions are detected automatically.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::densemath::{
    hermitian_eigenvalues, partial_transpose_mask, qubit_mask, ComplexMatrix, C64, ZERO,
};
use crate::error::{Error, Result};
use crate::qstate::{off_sector_norm, StateVector};
use crate::sdpsolver::{self, Bound, Equality, Field, SdpProblem, Status, Term, Variable};

/// Below this the partial transpose counts as positive semidefinite.
const PPT_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;
const MAX_PARTIES: usize = 4;

/// A split of the parties `0 .. num_parties` into two nonempty groups.
///
/// Stored as the side whose sorted index list compares smaller, so a side
/// and its complement give the same value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bipartition {
    side: Vec<usize>,
    num_parties: usize,
}

impl Bipartition {
    pub fn new(side: &[usize], num_parties: usize) -> Result<Self> {
        let mut side = side.to_vec();
        side.sort_unstable();
        for w in side.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateIndex(w[0]));
            }
        }
        if let Some(&bad) = side.iter().find(|&&q| q >= num_parties) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                num_qubits: num_parties,
            });
        }
        if side.is_empty() || side.len() == num_parties {
            return Err(Error::InvalidConfig(
                "a bipartition needs parties on both sides".into(),
            ));
        }
        let rest: Vec<usize> = (0..num_parties).filter(|q| !side.contains(q)).collect();
        let side = if rest < side { rest } else { side };
        Ok(Self { side, num_parties })
    }

    /// All `2^(n-1) - 1` bipartitions of `n` parties.
    pub fn all(num_parties: usize) -> Vec<Self> {
        let mut out: Vec<Self> = (1..(1usize << num_parties) - 1)
            .filter_map(|bits| {
                let side: Vec<usize> = (0..num_parties).filter(|q| bits >> q & 1 == 1).collect();
                Self::new(&side, num_parties).ok()
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn side(&self) -> &[usize] {
        &self.side
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.num_parties)
            .filter(|q| !self.side.contains(q))
            .collect()
    }

    pub fn num_parties(&self) -> usize {
        self.num_parties
    }

    /// Basis-index mask of the stored side.
    pub fn mask(&self) -> usize {
        qubit_mask(&self.side, self.num_parties)
    }
}

impl fmt::Display for Bipartition {
    /// 1-based parties, e.g. `1|23`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in &self.side {
            write!(f, "{}", q + 1)?;
        }
        write!(f, "|")?;
        for q in self.complement() {
            write!(f, "{}", q + 1)?;
        }
        Ok(())
    }
}

fn check_parties(rho: &ComplexMatrix, partition: &Bipartition) -> Result<()> {
    let expected = 1usize << partition.num_parties;
    if rho.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: rho.dim(),
        });
    }
    Ok(())
}

/// Sum of the magnitudes of the negative eigenvalues of `rho^{T_M}`.
pub fn negativity(rho: &ComplexMatrix, partition: &Bipartition) -> Result<f64> {
    check_parties(rho, partition)?;
    let pt = partial_transpose_mask(rho, partition.mask());
    let eig = hermitian_eigenvalues(&pt)?;
    Ok(eig.iter().filter(|&&l| l < 0.0).map(|l| -l).sum())
}

/// Smallest negativity over all bipartitions of a pure state.
pub fn min_bipartition_negativity(psi: &StateVector) -> Result<f64> {
    let n = psi.num_qubits();
    let rho = psi.density();
    let mut best = f64::INFINITY;
    for part in Bipartition::all(n) {
        best = best.min(negativity(&rho, &part)?);
    }
    Ok(if best.is_finite() { best } else { 0.0 })
}

/// Witness operators for one bipartition: `W = P + Q^{T_M}`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub partition: Bipartition,
    pub p: ComplexMatrix,
    pub q: ComplexMatrix,
}

#[derive(Clone, Debug)]
pub struct WitnessSolution {
    pub gmn_value: f64,
    pub witness: ComplexMatrix,
    pub decompositions: Vec<Decomposition>,
    pub duality_gap: f64,
    pub iterations: usize,
    pub status: Status,
}

#[derive(Clone, Copy, Debug)]
pub struct GmnOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Largest accepted duality gap.
    pub max_gap: f64,
    /// Use the excitation-number and real-phase reductions when they apply.
    pub exploit_symmetry: bool,
}

impl Default for GmnOptions {
    fn default() -> Self {
        Self {
            tol: 5e-7,
            max_iter: 100,
            max_gap: 1e-6,
            exploit_symmetry: true,
        }
    }
}

/// Genuine multipartite negativity of a state on 2 to 4 qubits, each qubit
/// one party.
pub fn gmn(rho: &ComplexMatrix) -> Result<WitnessSolution> {
    gmn_with(rho, &GmnOptions::default())
}

pub fn gmn_with(rho: &ComplexMatrix, options: &GmnOptions) -> Result<WitnessSolution> {
    let n = rho.num_qubits()?;
    if !(2..=MAX_PARTIES).contains(&n) {
        return Err(Error::DimensionTooLarge(n));
    }
    let residual = rho.hermitian_residual();
    if residual > 1e-10 * rho.max_abs().max(1.0) {
        return Err(Error::NonHermitianInput { residual });
    }
    let rho = rho.hermitian_part();
    let partitions = Bipartition::all(n);

    // Positive partial transpose on any cut: the zero witness is optimal.
    for part in &partitions {
        let pt = partial_transpose_mask(&rho, part.mask());
        if hermitian_eigenvalues(&pt)?[0] >= -PPT_TOL {
            return Ok(zero_solution(rho.dim(), &partitions));
        }
    }

    let symmetric = options.exploit_symmetry && off_sector_norm(&rho) <= SYMMETRY_TOL;
    let (phases, field) = if symmetric {
        let phases = real_gauge(&rho, n);
        let gauged = apply_phases(&rho, &phases);
        let imag = gauged.data().iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        if imag <= SYMMETRY_TOL {
            (phases, Field::Real)
        } else {
            (vec![0.0; n], Field::Complex)
        }
    } else {
        (vec![0.0; n], Field::Complex)
    };
    let target = apply_phases(&rho, &phases);
    let target = if field == Field::Real {
        ComplexMatrix::from_fn(target.dim(), |r, c| C64::new(target[(r, c)].re, 0.0))
    } else {
        target
    };

    let dim = rho.dim();
    let number = |i: usize| i.count_ones() as usize;
    let mut problem = SdpProblem::new();
    let mut w_var = Variable::new(dim, field, Bound::Free).with_start(ComplexMatrix::identity(dim));
    if symmetric {
        w_var = w_var.with_sectors((0..dim).map(number).collect());
    }
    let w = problem.add_variable(w_var);
    let mut pairs = Vec::with_capacity(partitions.len());
    for part in &partitions {
        let mask = part.mask();
        let mut q_var = Variable::new(dim, field, Bound::Box);
        let mut p_var = Variable::new(dim, field, Bound::Box);
        if symmetric {
            // Q^{T_M} conserves excitation number exactly when Q conserves
            // N(rest) - N(M).
            q_var = q_var.with_sectors(
                (0..dim)
                    .map(|i| n + number(i & !mask) - number(i & mask))
                    .collect(),
            );
            p_var = p_var.with_sectors((0..dim).map(number).collect());
        }
        let q = problem.add_variable(q_var);
        let p = problem.add_variable(p_var);
        problem.add_equality(Equality {
            lhs: p,
            terms: vec![
                Term {
                    var: w,
                    coeff: 1.0,
                    transpose_mask: 0,
                },
                Term {
                    var: q,
                    coeff: -1.0,
                    transpose_mask: mask,
                },
            ],
            constant: None,
        });
        pairs.push((p, q));
    }
    problem.add_objective(w, target);

    let sol = match sdpsolver::solve(&problem, options.tol, options.max_iter) {
        Ok(s) => s,
        Err(Error::IterationLimit { gap }) => {
            return Err(Error::SolverFailure(format!(
                "no convergence within {} iterations (gap {gap:e})",
                options.max_iter
            )))
        }
        Err(e) => return Err(Error::SolverFailure(e.to_string())),
    };
    if !(sol.duality_gap.abs() < options.max_gap) {
        return Err(Error::SolverFailure(format!(
            "duality gap {:e} above {:e}",
            sol.duality_gap, options.max_gap
        )));
    }

    let undo: Vec<f64> = phases.iter().map(|p| -p).collect();
    let witness = apply_phases(&sol.values[w], &undo);
    let decompositions = partitions
        .iter()
        .zip(&pairs)
        .map(|(part, &(p, q))| {
            let mask = part.mask();
            let q_back = partial_transpose_mask(
                &apply_phases(&partial_transpose_mask(&sol.values[q], mask), &undo),
                mask,
            );
            Decomposition {
                partition: part.clone(),
                p: apply_phases(&sol.values[p], &undo),
                q: q_back,
            }
        })
        .collect();
    let expectation = witness.trace_product_re(&rho);
    Ok(WitnessSolution {
        gmn_value: (-expectation).max(0.0),
        witness,
        decompositions,
        duality_gap: sol.duality_gap,
        iterations: sol.iterations,
        status: sol.status,
    })
}

fn zero_solution(dim: usize, partitions: &[Bipartition]) -> WitnessSolution {
    WitnessSolution {
        gmn_value: 0.0,
        witness: ComplexMatrix::zeros(dim),
        decompositions: partitions
            .iter()
            .map(|part| Decomposition {
                partition: part.clone(),
                p: ComplexMatrix::zeros(dim),
                q: ComplexMatrix::zeros(dim),
            })
            .collect(),
        duality_gap: 0.0,
        iterations: 0,
        status: Status::Optimal,
    }
}

/// `U rho U^dagger` with `U = diag(exp(i sum_k phi_k b_k))`.
fn apply_phases(rho: &ComplexMatrix, phases: &[f64]) -> ComplexMatrix {
    if phases.iter().all(|&p| p == 0.0) {
        return rho.clone();
    }
    let n = phases.len();
    let dim = rho.dim();
    let angle: Vec<f64> = (0..dim)
        .map(|i| {
            (0..n)
                .filter(|k| i >> (n - 1 - k) & 1 == 1)
                .map(|k| phases[k])
                .sum()
        })
        .collect();
    ComplexMatrix::from_fn(dim, |r, c| {
        rho[(r, c)] * C64::from_polar(1.0, angle[r] - angle[c])
    })
}

/// Local phases that make the coherences between basis states differing by a
/// single hop of one excitation real and positive, chosen along a maximum
/// weight spanning tree of those hops.
fn real_gauge(rho: &ComplexMatrix, n: usize) -> Vec<f64> {
    // best[(j, k)] = largest coherence moving an excitation from k to j
    let mut best: Vec<Vec<C64>> = vec![vec![ZERO; n]; n];
    let dim = rho.dim();
    for r in 0..dim {
        for c in 0..dim {
            let diff = r ^ c;
            if diff.count_ones() != 2 || r.count_ones() != c.count_ones() {
                continue;
            }
            let j = (0..n).find(|k| (r & !c) >> (n - 1 - k) & 1 == 1).unwrap();
            let k = (0..n).find(|k| (c & !r) >> (n - 1 - k) & 1 == 1).unwrap();
            if rho[(r, c)].norm() > best[j][k].norm() {
                best[j][k] = rho[(r, c)];
            }
        }
    }
    let mut phases = vec![0.0; n];
    let mut in_tree = vec![false; n];
    for root in 0..n {
        if in_tree[root] {
            continue;
        }
        in_tree[root] = true;
        loop {
            let mut pick: Option<(usize, usize, f64)> = None;
            for j in 0..n {
                for k in 0..n {
                    if in_tree[k] && !in_tree[j] {
                        let m = best[j][k].norm();
                        if m > 1e-9 && pick.map_or(true, |p| m > p.2) {
                            pick = Some((j, k, m));
                        }
                    }
                }
            }
            let Some((j, k, _)) = pick else { break };
            // element (r, c) picks up exp(i (phi_j - phi_k))
            phases[j] = phases[k] - best[j][k].arg();
            in_tree[j] = true;
        }
    }
    phases
}

/// Outcome of an independent certificate check.
#[derive(Clone, Copy, Debug)]
pub struct WitnessReport {
    pub expectation: f64,
    pub max_decomposition_residual: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

const RESIDUAL_TOL: f64 = 1e-7;
const EIGEN_TOL: f64 = 1e-8;

/// Re-checks a witness against `rho` from scratch.
pub fn verify_witness(solution: &WitnessSolution, rho: &ComplexMatrix) -> Result<WitnessReport> {
    let w = &solution.witness;
    if w.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: w.dim(),
        });
    }
    let herm = w.hermitian_residual();
    if herm > RESIDUAL_TOL {
        return Err(Error::CertificateInvalid(format!(
            "witness is not Hermitian (residual {herm:e})"
        )));
    }
    let n = rho.num_qubits()?;
    let expected = Bipartition::all(n);
    let mut found: Vec<&Bipartition> = solution.decompositions.iter().map(|d| &d.partition).collect();
    found.sort();
    if found.len() != expected.len() || found.iter().zip(&expected).any(|(a, b)| *a != b) {
        return Err(Error::CertificateInvalid(
            "decompositions do not cover every bipartition exactly once".into(),
        ));
    }
    let mut report = WitnessReport {
        expectation: w.trace_product_re(rho),
        max_decomposition_residual: 0.0,
        min_eigenvalue: f64::INFINITY,
        max_eigenvalue: f64::NEG_INFINITY,
    };
    for d in &solution.decompositions {
        let rebuilt = &d.p + &partial_transpose_mask(&d.q, d.partition.mask());
        let res = w.max_diff(&rebuilt);
        report.max_decomposition_residual = report.max_decomposition_residual.max(res);
        if res >= RESIDUAL_TOL {
            return Err(Error::CertificateInvalid(format!(
                "W != P + Q^T for {} (residual {res:e})",
                d.partition
            )));
        }
        for (name, m) in [("P", &d.p), ("Q", &d.q)] {
            let eig = hermitian_eigenvalues(m).map_err(|_| {
                Error::CertificateInvalid(format!("{name} for {} is not Hermitian", d.partition))
            })?;
            let lo = eig[0];
            let hi = *eig.last().unwrap();
            report.min_eigenvalue = report.min_eigenvalue.min(lo);
            report.max_eigenvalue = report.max_eigenvalue.max(hi);
            if lo < -EIGEN_TOL || hi > 1.0 + EIGEN_TOL {
                return Err(Error::CertificateInvalid(format!(
                    "{name} for {} has eigenvalues in [{lo}, {hi}], outside [0, 1]",
                    d.partition
                )));
            }
        }
    }
    let value = (-report.expectation).max(0.0);
    if (value - solution.gmn_value).abs() >= RESIDUAL_TOL {
        return Err(Error::CertificateInvalid(format!(
            "reported value {} but the witness gives {value}",
            solution.gmn_value
        )));
    }
    Ok(report)
}
