//! Small dense semidefinite programs over Hermitian matrix variables.
//!
//! A problem is written in terms of matrix variables, each optionally
//! constrained to `X >= 0` or `0 <= X <= I`. Linear relations between
//! variables are given as definitions
//!
//! ```text
//! X_lhs = sum_t coeff_t * T_t(X_t) + K
//! ```
//!
//! where `T_t` is a partial transpose over a qubit mask (or the identity).
//! Defined variables are substituted away, so the remaining unknowns are the
//! real coordinates of the independent variables and every cone constraint is
//! a linear matrix inequality in them. Complex blocks are embedded as real
//! symmetric matrices of twice the size before the interior-point solve.
//!
//! Variables may also carry a sector labelling: entry `(r, c)` is allowed
//! only when `sector[r] == sector[c]`. Cone constraints then split into one
//! block per sector, which keeps symmetric problems small.

mod dense;
pub mod ipm;
pub mod sym;

use std::collections::BTreeMap;

use crate::densemath::{transpose_indices, ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};
pub use ipm::{IpmOptions, SolveStatus as Status};
use ipm::{ConeBlock, StandardForm};
use sym::SparseSym;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Free,
    /// `X >= 0`
    Psd,
    /// `0 <= X <= I`
    Box,
}

#[derive(Clone, Debug)]
pub struct Variable {
    pub dim: usize,
    pub field: Field,
    pub bound: Bound,
    pub sectors: Option<Vec<usize>>,
    /// Starting value; defaults to `I/2` for box, `I` for PSD and `0` for free
    /// variables.
    pub start: Option<ComplexMatrix>,
}

impl Variable {
    pub fn new(dim: usize, field: Field, bound: Bound) -> Self {
        Self {
            dim,
            field,
            bound,
            sectors: None,
            start: None,
        }
    }

    pub fn with_sectors(mut self, sectors: Vec<usize>) -> Self {
        self.sectors = Some(sectors);
        self
    }

    pub fn with_start(mut self, start: ComplexMatrix) -> Self {
        self.start = Some(start);
        self
    }

    fn allowed(&self, r: usize, c: usize) -> bool {
        self.sectors.as_ref().map_or(true, |s| s[r] == s[c])
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Term {
    pub var: usize,
    pub coeff: f64,
    /// Qubit mask for a partial transpose; 0 leaves the variable as is.
    pub transpose_mask: usize,
}

#[derive(Clone, Debug)]
pub struct Equality {
    pub lhs: usize,
    pub terms: Vec<Term>,
    pub constant: Option<ComplexMatrix>,
}

/// `sum_v Re Tr(A_v X_v) = rhs`.
#[derive(Clone, Debug)]
pub struct ScalarEquality {
    pub terms: Vec<(usize, ComplexMatrix)>,
    pub rhs: f64,
}

/// Minimize `sum Re Tr(C_v X_v)` over the declared variables.
#[derive(Clone, Debug, Default)]
pub struct SdpProblem {
    variables: Vec<Variable>,
    objective: Vec<(usize, ComplexMatrix)>,
    equalities: Vec<Equality>,
    scalar_equalities: Vec<ScalarEquality>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, var: Variable) -> usize {
        self.variables.push(var);
        self.variables.len() - 1
    }

    pub fn add_objective(&mut self, var: usize, c: ComplexMatrix) {
        self.objective.push((var, c));
    }

    pub fn add_equality(&mut self, eq: Equality) {
        self.equalities.push(eq);
    }

    pub fn add_scalar_equality(&mut self, eq: ScalarEquality) {
        self.scalar_equalities.push(eq);
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub values: Vec<ComplexMatrix>,
    /// Objective at the returned point.
    pub primal_objective: f64,
    /// Lower bound certified by the dual iterate.
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub status: Status,
}

/// Real symmetric `2n x 2n` embedding `[[Re H, -Im H], [Im H, Re H]]`,
/// row-major.
pub fn realify(h: &ComplexMatrix) -> Vec<f64> {
    let n = h.dim();
    let m = 2 * n;
    let mut out = vec![0.0; m * m];
    for r in 0..n {
        for c in 0..n {
            let z = h[(r, c)];
            out[r * m + c] = z.re;
            out[(n + r) * m + n + c] = z.re;
            out[r * m + n + c] = -z.im;
            out[(n + r) * m + c] = z.im;
        }
    }
    out
}

type Entries = Vec<(usize, usize, C64)>;

/// Affine expression `K + sum_k y_k B_k` for one variable.
struct Expression {
    constant: ComplexMatrix,
    terms: BTreeMap<usize, Entries>,
}

fn validate(problem: &SdpProblem) -> Result<()> {
    let vars = &problem.variables;
    for (k, v) in vars.iter().enumerate() {
        if v.dim == 0 {
            return Err(Error::MalformedProblem(format!("variable {k} has dimension 0")));
        }
        if let Some(s) = &v.sectors {
            if s.len() != v.dim {
                return Err(Error::MalformedProblem(format!(
                    "variable {k}: {} sector labels for dimension {}",
                    s.len(),
                    v.dim
                )));
            }
        }
        if let Some(s) = &v.start {
            if s.dim() != v.dim {
                return Err(Error::MalformedProblem(format!("variable {k}: start has wrong size")));
            }
        }
    }
    let functionals = problem
        .objective
        .iter()
        .chain(problem.scalar_equalities.iter().flat_map(|e| e.terms.iter()));
    for (v, c) in functionals {
        let var = vars
            .get(*v)
            .ok_or_else(|| Error::MalformedProblem(format!("functional refers to variable {v}")))?;
        if c.dim() != var.dim {
            return Err(Error::MalformedProblem(format!(
                "functional matrix for variable {v} has dimension {}",
                c.dim()
            )));
        }
        if !c.is_hermitian(1e-12 * c.max_abs().max(1.0)) {
            return Err(Error::MalformedProblem(format!(
                "functional matrix for variable {v} is not Hermitian"
            )));
        }
    }
    let mut defined = vec![false; vars.len()];
    for eq in &problem.equalities {
        if eq.lhs >= vars.len() || defined[eq.lhs] {
            return Err(Error::MalformedProblem(format!(
                "variable {} defined twice or missing",
                eq.lhs
            )));
        }
        defined[eq.lhs] = true;
    }
    for eq in &problem.equalities {
        let dim = vars[eq.lhs].dim;
        for t in &eq.terms {
            if t.var >= vars.len() {
                return Err(Error::MalformedProblem(format!("term refers to variable {}", t.var)));
            }
            if defined[t.var] {
                return Err(Error::MalformedProblem(format!(
                    "variable {} is defined and also used in a definition",
                    t.var
                )));
            }
            if vars[t.var].dim != dim {
                return Err(Error::MalformedProblem(format!(
                    "term variable {} has dimension {}, expected {dim}",
                    t.var, vars[t.var].dim
                )));
            }
            if t.transpose_mask >= dim || (t.transpose_mask != 0 && !dim.is_power_of_two()) {
                return Err(Error::MalformedProblem(format!(
                    "transpose mask {:#b} does not fit dimension {dim}",
                    t.transpose_mask
                )));
            }
        }
        if let Some(k) = &eq.constant {
            if k.dim() != dim || !k.is_hermitian(1e-12 * k.max_abs().max(1.0)) {
                return Err(Error::MalformedProblem(format!(
                    "constant for variable {} is not a Hermitian {dim}x{dim} matrix",
                    eq.lhs
                )));
            }
        }
    }
    Ok(())
}

/// Coordinates of the independent variables and the expressions for all.
struct Compiled {
    num_coords: usize,
    expressions: Vec<Expression>,
    /// `(var, r, c, imaginary)` for each coordinate.
    coords: Vec<(usize, usize, usize, bool)>,
}

fn compile(problem: &SdpProblem) -> Result<Compiled> {
    let vars = &problem.variables;
    let mut defined = vec![None; vars.len()];
    for (k, eq) in problem.equalities.iter().enumerate() {
        defined[eq.lhs] = Some(k);
    }
    let mut coords = Vec::new();
    let mut expressions: Vec<Expression> = Vec::with_capacity(vars.len());
    for (k, v) in vars.iter().enumerate() {
        let mut terms = BTreeMap::new();
        if defined[k].is_none() {
            for r in 0..v.dim {
                for c in r..v.dim {
                    if !v.allowed(r, c) {
                        continue;
                    }
                    let idx = coords.len();
                    coords.push((k, r, c, false));
                    let ents = if r == c {
                        vec![(r, r, C64::new(1.0, 0.0))]
                    } else {
                        vec![(r, c, C64::new(1.0, 0.0)), (c, r, C64::new(1.0, 0.0))]
                    };
                    terms.insert(idx, ents);
                    if r != c && v.field == Field::Complex {
                        let idx = coords.len();
                        coords.push((k, r, c, true));
                        terms.insert(idx, vec![(r, c, C64::new(0.0, 1.0)), (c, r, C64::new(0.0, -1.0))]);
                    }
                }
            }
        }
        expressions.push(Expression {
            constant: ComplexMatrix::zeros(v.dim),
            terms,
        });
    }

    for eq in &problem.equalities {
        let lhs = &vars[eq.lhs];
        let mut terms: BTreeMap<usize, Entries> = BTreeMap::new();
        let mut constant = eq.constant.clone().unwrap_or_else(|| ComplexMatrix::zeros(lhs.dim));
        for t in &eq.terms {
            let src = &expressions[t.var];
            for (idx, ents) in &src.terms {
                let out = terms.entry(*idx).or_default();
                for &(r, c, z) in ents {
                    let (r2, c2) = transpose_indices(r, c, t.transpose_mask);
                    out.push((r2, c2, z * t.coeff));
                }
            }
            for r in 0..lhs.dim {
                for c in 0..lhs.dim {
                    let z = src.constant[(r, c)];
                    if z != ZERO {
                        let (r2, c2) = transpose_indices(r, c, t.transpose_mask);
                        constant[(r2, c2)] += z * t.coeff;
                    }
                }
            }
        }
        for ents in terms.values_mut() {
            merge_entries(ents);
            for &(r, c, z) in ents.iter() {
                if !lhs.allowed(r, c) {
                    return Err(Error::MalformedProblem(format!(
                        "definition of variable {} leaves its sector structure at ({r}, {c})",
                        eq.lhs
                    )));
                }
                if lhs.field == Field::Real && z.im != 0.0 {
                    return Err(Error::MalformedProblem(format!(
                        "definition of real variable {} has a complex entry",
                        eq.lhs
                    )));
                }
            }
        }
        terms.retain(|_, e| !e.is_empty());
        for r in 0..lhs.dim {
            for c in 0..lhs.dim {
                let z = constant[(r, c)];
                if z != ZERO && (!lhs.allowed(r, c) || (lhs.field == Field::Real && z.im != 0.0)) {
                    return Err(Error::MalformedProblem(format!(
                        "constant of variable {} breaks its structure at ({r}, {c})",
                        eq.lhs
                    )));
                }
            }
        }
        expressions[eq.lhs] = Expression { constant, terms };
    }
    let mut compiled = Compiled {
        num_coords: coords.len(),
        expressions,
        coords,
    };
    if !problem.scalar_equalities.is_empty() {
        eliminate(problem, &mut compiled)?;
    }
    Ok(compiled)
}

/// `Re Tr(A X)` for a sparse `X`.
fn functional(a: &ComplexMatrix, ents: &[(usize, usize, C64)]) -> f64 {
    ents.iter().map(|&(r, c, z)| (a[(c, r)] * z).re).sum()
}

/// Removes scalar equalities by solving them for a subset of coordinates
/// (reduced row echelon form with partial pivoting) and substituting.
fn eliminate(problem: &SdpProblem, compiled: &mut Compiled) -> Result<()> {
    let m = compiled.num_coords;
    let mut rows: Vec<(Vec<f64>, f64)> = problem
        .scalar_equalities
        .iter()
        .map(|eq| {
            let mut row = vec![0.0; m];
            let mut rhs = eq.rhs;
            for (v, a) in &eq.terms {
                let expr = &compiled.expressions[*v];
                rhs -= a.trace_product_re(&expr.constant);
                for (idx, ents) in &expr.terms {
                    row[*idx] += functional(a, ents);
                }
            }
            (row, rhs)
        })
        .collect();

    let mut pivots: Vec<usize> = Vec::new();
    let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
    while let Some((mut row, mut rhs)) = rows.pop() {
        for ((prow, prhs), &p) in kept.iter().zip(&pivots) {
            let f = row[p];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(prow) {
                    *x -= f * y;
                }
                rhs -= f * prhs;
            }
        }
        let scale = row.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let (p, pv) = row
            .iter()
            .enumerate()
            .fold((0, 0.0), |best, (j, &x)| if x.abs() > best.1 { (j, x.abs()) } else { best });
        if pv <= 1e-12 * scale.max(1.0) {
            if rhs.abs() > 1e-9 {
                return Err(Error::Infeasible("scalar equalities are inconsistent".into()));
            }
            continue;
        }
        let inv = 1.0 / row[p];
        row.iter_mut().for_each(|x| *x *= inv);
        rhs *= inv;
        row[p] = 1.0;
        for (prow, prhs) in kept.iter_mut() {
            let f = prow[p];
            if f != 0.0 {
                for (x, y) in prow.iter_mut().zip(&row) {
                    *x -= f * y;
                }
                *prhs -= f * rhs;
            }
        }
        kept.push((row, rhs));
        pivots.push(p);
    }

    // y_p = rhs - sum_{j free} row_j y_j
    for expr in compiled.expressions.iter_mut() {
        for ((row, rhs), &p) in kept.iter().zip(&pivots) {
            let Some(ents) = expr.terms.remove(&p) else {
                continue;
            };
            for &(r, c, z) in &ents {
                expr.constant[(r, c)] += z * *rhs;
            }
            for (j, &f) in row.iter().enumerate() {
                if f != 0.0 && j != p {
                    let dst = expr.terms.entry(j).or_default();
                    dst.extend(ents.iter().map(|&(r, c, z)| (r, c, z * -f)));
                }
            }
        }
        for ents in expr.terms.values_mut() {
            merge_entries(ents);
        }
        expr.terms.retain(|_, e| !e.is_empty());
    }

    let mut renumber = vec![None; m];
    let mut coords = Vec::new();
    for (j, coord) in compiled.coords.iter().enumerate() {
        if !pivots.contains(&j) {
            renumber[j] = Some(coords.len());
            coords.push(*coord);
        }
    }
    for expr in compiled.expressions.iter_mut() {
        let old = std::mem::take(&mut expr.terms);
        expr.terms = old
            .into_iter()
            .map(|(j, e)| (renumber[j].expect("pivot coordinates were substituted"), e))
            .collect();
    }
    compiled.num_coords = coords.len();
    compiled.coords = coords;
    Ok(())
}

fn merge_entries(ents: &mut Entries) {
    ents.sort_by_key(|&(r, c, _)| (r, c));
    let mut out: Entries = Vec::with_capacity(ents.len());
    for &(r, c, z) in ents.iter() {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += z,
            _ => out.push((r, c, z)),
        }
    }
    out.retain(|e| e.2 != ZERO);
    *ents = out;
}

fn sector_groups(v: &Variable) -> Vec<Vec<usize>> {
    match &v.sectors {
        None => vec![(0..v.dim).collect()],
        Some(labels) => {
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, &l) in labels.iter().enumerate() {
                groups.entry(l).or_default().push(i);
            }
            groups.into_values().collect()
        }
    }
}

/// Real symmetric embedding of sparse Hermitian entries restricted to one
/// sector. `local[i]` maps a global index into the sector, `n` is the sector
/// size.
fn embed(ents: &[(usize, usize, C64)], local: &[Option<usize>], n: usize, complex: bool, sign: f64) -> SparseSym {
    let mut s = SparseSym::new();
    for &(r, c, z) in ents {
        let (Some(a), Some(b)) = (local[r], local[c]) else {
            continue;
        };
        if a > b {
            continue;
        }
        s.push(a, b, sign * z.re);
        if complex {
            s.push(n + a, n + b, sign * z.re);
            if a != b {
                s.push(a, n + b, -sign * z.im);
                s.push(b, n + a, sign * z.im);
            }
        }
    }
    s.compact();
    s
}

fn build_standard_form(problem: &SdpProblem, compiled: &Compiled) -> Result<(StandardForm, f64)> {
    let vars = &problem.variables;
    let mut blocks = Vec::new();
    for (k, v) in vars.iter().enumerate() {
        if v.bound == Bound::Free {
            continue;
        }
        let expr = &compiled.expressions[k];
        let complex = v.field == Field::Complex;
        for group in sector_groups(v) {
            let n = group.len();
            let mut local = vec![None; v.dim];
            for (i, &g) in group.iter().enumerate() {
                local[g] = Some(i);
            }
            let bdim = if complex { 2 * n } else { n };
            let const_entries: Entries = group
                .iter()
                .flat_map(|&r| group.iter().map(move |&c| (r, c)))
                .map(|(r, c)| (r, c, expr.constant[(r, c)]))
                .filter(|e| e.2 != ZERO)
                .collect();
            let mut coeffs = Vec::new();
            for (idx, ents) in &expr.terms {
                let a = embed(ents, &local, n, complex, 1.0);
                if !a.is_empty() {
                    coeffs.push((*idx, a));
                }
            }
            // X >= 0:  Z = K - sum y (-B)
            blocks.push(ConeBlock {
                dim: bdim,
                constant: embed(&const_entries, &local, n, complex, 1.0),
                coefficients: coeffs
                    .iter()
                    .map(|(i, a)| {
                        let mut neg = SparseSym::new();
                        for &(p, q, x) in a.entries() {
                            neg.push(p, q, -x);
                        }
                        (*i, neg)
                    })
                    .collect(),
            });
            if v.bound == Bound::Box {
                // I - X >= 0:  Z = (I - K) - sum y B
                let mut c = embed(&const_entries, &local, n, complex, -1.0);
                for i in 0..bdim {
                    c.push(i, i, 1.0);
                }
                c.compact();
                blocks.push(ConeBlock {
                    dim: bdim,
                    constant: c,
                    coefficients: coeffs,
                });
            }
        }
    }

    let mut cost = vec![0.0; compiled.num_coords];
    let mut c0 = 0.0;
    for (v, cm) in &problem.objective {
        let expr = &compiled.expressions[*v];
        c0 += cm.trace_product_re(&expr.constant);
        for (idx, ents) in &expr.terms {
            cost[*idx] += functional(cm, ents);
        }
    }
    Ok((
        StandardForm {
            num_vars: compiled.num_coords,
            objective: cost.iter().map(|c| -c).collect(),
            blocks,
        },
        c0,
    ))
}

fn starting_point(problem: &SdpProblem, compiled: &Compiled) -> Vec<f64> {
    compiled
        .coords
        .iter()
        .map(|&(k, r, c, imag)| {
            let v = &problem.variables[k];
            let z = match &v.start {
                Some(s) => s[(r, c)],
                None if r == c => C64::new(
                    match v.bound {
                        Bound::Free => 0.0,
                        Bound::Psd => 1.0,
                        Bound::Box => 0.5,
                    },
                    0.0,
                ),
                None => ZERO,
            };
            if imag {
                z.im
            } else {
                z.re
            }
        })
        .collect()
}

/// Solves `problem` to relative accuracy `tol`.
///
/// Returns `Err(Infeasible)` when the iterates certify that no feasible point
/// exists and `Err(IterationLimit)` when `max_iter` iterations pass without
/// reaching `tol`. A run that stalls earlier for numerical reasons returns
/// its best point with status [`Status::NumericalLimit`].
pub fn solve(problem: &SdpProblem, tol: f64, max_iter: usize) -> Result<SdpSolution> {
    validate(problem)?;
    let compiled = compile(problem)?;
    let (standard, c0) = build_standard_form(problem, &compiled)?;
    let options = IpmOptions {
        tol,
        max_iter,
        initial_y: Some(starting_point(problem, &compiled)),
        initial_x_scale: None,
    };
    let sol = ipm::solve_standard(&standard, &options)?;
    let values = compiled
        .expressions
        .iter()
        .map(|expr| {
            let mut x = expr.constant.clone();
            for (idx, ents) in &expr.terms {
                let y = sol.y[*idx];
                for &(r, c, z) in ents {
                    x[(r, c)] += z * y;
                }
            }
            x
        })
        .collect();
    Ok(SdpSolution {
        values,
        primal_objective: c0 - sol.dual_objective,
        dual_objective: c0 - sol.primal_objective,
        duality_gap: sol.gap(),
        iterations: sol.iterations,
        status: sol.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densemath::{hermitian_eigenvalues, symmetric_eig};

    #[test]
    fn realify_of_sigma_y_has_doubled_spectrum() {
        let sy = ComplexMatrix::from_vec(
            2,
            vec![ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO],
        )
        .unwrap();
        let (vals, _) = symmetric_eig(&realify(&sy), 4);
        let expect = [-1.0, -1.0, 1.0, 1.0];
        for (a, b) in vals.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn realify_real_input_duplicates_blocks() {
        let h = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 3.0]]).unwrap();
        let r = realify(&h);
        let expect = [
            1.0, 2.0, 0.0, 0.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 2.0, 3.0,
        ];
        assert_eq!(r, expect);
        assert_eq!(realify(&ComplexMatrix::identity(3)), dense::identity(6));
    }

    fn hermitian_c() -> ComplexMatrix {
        ComplexMatrix::from_vec(
            3,
            vec![
                C64::new(1.0, 0.0),
                C64::new(0.3, 0.4),
                C64::new(0.0, -0.2),
                C64::new(0.3, -0.4),
                C64::new(-0.5, 0.0),
                C64::new(0.1, 0.0),
                C64::new(0.0, 0.2),
                C64::new(0.1, 0.0),
                C64::new(2.0, 0.0),
            ],
        )
        .unwrap()
    }

    fn trace_one_program(c: &ComplexMatrix) -> SdpProblem {
        let n = c.dim();
        let mut p = SdpProblem::new();
        let x = p.add_variable(Variable::new(n, Field::Complex, Bound::Psd));
        p.add_objective(x, c.clone());
        p.add_scalar_equality(ScalarEquality {
            terms: vec![(x, ComplexMatrix::identity(n))],
            rhs: 1.0,
        });
        p
    }

    #[test]
    fn trace_one_program_gives_smallest_eigenvalue() {
        let c = hermitian_c();
        let sol = solve(&trace_one_program(&c), 1e-9, 100).unwrap();
        let lmin = hermitian_eigenvalues(&c).unwrap()[0];
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.primal_objective - lmin).abs() < 1e-7, "{} vs {lmin}", sol.primal_objective);
        assert!(sol.duality_gap >= -1e-9);
        let x = &sol.values[0];
        assert!((x.trace().re - 1.0).abs() < 1e-7);
        assert!(hermitian_eigenvalues(x).unwrap()[0] > -1e-8);
    }

    #[test]
    fn shifted_identity_program_gives_largest_eigenvalue() {
        // min Tr(T)/n  s.t.  T - A >= 0,  T diagonal with equal entries.
        let a = hermitian_c();
        let n = a.dim();
        let mut p = SdpProblem::new();
        let t = p.add_variable(Variable::new(n, Field::Real, Bound::Free).with_sectors((0..n).collect()));
        let x = p.add_variable(Variable::new(n, Field::Complex, Bound::Psd));
        p.add_equality(Equality {
            lhs: x,
            terms: vec![Term {
                var: t,
                coeff: 1.0,
                transpose_mask: 0,
            }],
            constant: Some(a.scale_real(-1.0)),
        });
        for k in 1..n {
            let mut d = vec![0.0; n];
            d[0] = 1.0;
            d[k] = -1.0;
            p.add_scalar_equality(ScalarEquality {
                terms: vec![(t, ComplexMatrix::from_real_diag(&d))],
                rhs: 0.0,
            });
        }
        p.add_objective(t, ComplexMatrix::identity(n).scale_real(1.0 / n as f64));
        let sol = solve(&p, 1e-9, 100).unwrap();
        let lmax = *hermitian_eigenvalues(&a).unwrap().last().unwrap();
        assert!((sol.primal_objective - lmax).abs() < 1e-7);
    }

    fn bell() -> ComplexMatrix {
        let h = 0.5f64.sqrt();
        let psi = [C64::new(h, 0.0), ZERO, ZERO, C64::new(h, 0.0)];
        ComplexMatrix::outer(&psi)
    }

    /// min Tr(W rho)  s.t.  W = P + Q^{T_B},  0 <= P, Q <= I.
    fn two_qubit_witness_program(rho: &ComplexMatrix) -> SdpProblem {
        let mut p = SdpProblem::new();
        let w = p.add_variable(
            Variable::new(4, Field::Complex, Bound::Free).with_start(ComplexMatrix::identity(4)),
        );
        let q = p.add_variable(Variable::new(4, Field::Complex, Bound::Box));
        let pm = p.add_variable(Variable::new(4, Field::Complex, Bound::Box));
        p.add_equality(Equality {
            lhs: pm,
            terms: vec![
                Term {
                    var: w,
                    coeff: 1.0,
                    transpose_mask: 0,
                },
                Term {
                    var: q,
                    coeff: -1.0,
                    transpose_mask: 0b01,
                },
            ],
            constant: None,
        });
        p.add_objective(w, rho.clone());
        p
    }

    #[test]
    fn bell_witness_program_reaches_minus_half() {
        let sol = solve(&two_qubit_witness_program(&bell()), 1e-9, 100).unwrap();
        assert!((sol.primal_objective + 0.5).abs() < 1e-7, "{}", sol.primal_objective);
        for v in &sol.values[1..] {
            let ev = hermitian_eigenvalues(v).unwrap();
            assert!(ev[0] > -1e-8 && ev[3] < 1.0 + 1e-8);
        }
        let w = &sol.values[0];
        let rebuilt = &sol.values[2] + &crate::densemath::partial_transpose(&sol.values[1], &[1]).unwrap();
        assert!(w.max_diff(&rebuilt) < 1e-7);
    }

    #[test]
    fn objective_scaling_scales_optimum() {
        let c = hermitian_c();
        let base = solve(&trace_one_program(&c), 1e-10, 100).unwrap();
        let scaled = solve(&trace_one_program(&c.scale_real(3.5)), 1e-10, 100).unwrap();
        assert!((scaled.primal_objective - 3.5 * base.primal_objective).abs() < 1e-8);
    }

    #[test]
    fn negative_trace_is_infeasible() {
        let mut p = SdpProblem::new();
        let x = p.add_variable(Variable::new(2, Field::Real, Bound::Psd));
        p.add_objective(x, ComplexMatrix::identity(2));
        p.add_scalar_equality(ScalarEquality {
            terms: vec![(x, ComplexMatrix::identity(2))],
            rhs: -1.0,
        });
        let out = solve(&p, 1e-9, 200);
        assert!(matches!(out, Err(Error::Infeasible(_))), "{out:?}");
    }

    #[test]
    fn sector_violation_is_malformed() {
        let mut p = SdpProblem::new();
        let a = p.add_variable(Variable::new(2, Field::Real, Bound::Box));
        let b = p.add_variable(Variable::new(2, Field::Real, Bound::Box).with_sectors(vec![0, 1]));
        p.add_equality(Equality {
            lhs: b,
            terms: vec![Term {
                var: a,
                coeff: 1.0,
                transpose_mask: 0,
            }],
            constant: None,
        });
        assert!(matches!(solve(&p, 1e-8, 50), Err(Error::MalformedProblem(_))));
    }
}
