//! Primal-dual interior-point method for real semidefinite programs in
//! standard form.
//!
//! ```text
//! primal:  min  sum_j <C_j, X_j>   s.t.  sum_j <A_ij, X_j> = b_i,   X_j >= 0
//! dual:    max  b^T y              s.t.  Z_j = C_j - sum_i y_i A_ij >= 0
//! ```
//!
//! Search directions use Nesterov-Todd scaling with a Mehrotra
//! predictor-corrector; steps stop at 0.98 of the distance to the cone
//! boundary.

use super::dense::{self, CholeskyPattern, SparseCholesky};
use super::sym::SparseSym;
use crate::densemath::{symmetric_eig, symmetric_eigenvalues};
use crate::error::{Error, Result};

const STEP_FRACTION: f64 = 0.98;

/// One semidefinite block of the standard form.
#[derive(Clone, Debug)]
pub struct ConeBlock {
    pub dim: usize,
    pub constant: SparseSym,
    /// `(variable index, A_ij)` for every variable that touches this block.
    pub coefficients: Vec<(usize, SparseSym)>,
}

/// Real standard-form SDP.
#[derive(Clone, Debug)]
pub struct StandardForm {
    pub num_vars: usize,
    /// Dual objective `b` (maximized).
    pub objective: Vec<f64>,
    pub blocks: Vec<ConeBlock>,
}

#[derive(Clone, Debug)]
pub struct IpmOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting dual point; used when `C - A^T y` is positive definite there.
    pub initial_y: Option<Vec<f64>>,
    /// Scale of the starting primal point `X = scale * I`.
    pub initial_x_scale: Option<f64>,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            initial_y: None,
            initial_x_scale: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Progress stalled before `tol`; the best point found is returned.
    NumericalLimit,
}

/// Per-iteration diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub complementarity: f64,
}

#[derive(Clone, Debug)]
pub struct StandardSolution {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// `C - A^T y`, recomputed from `y`.
    pub z: Vec<Vec<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub history: Vec<IterationRecord>,
}

impl StandardSolution {
    /// `primal - dual`; never clamped.
    pub fn gap(&self) -> f64 {
        self.primal_objective - self.dual_objective
    }
}

/// Block data with the weights needed for fast Schur complement assembly.
struct PreparedBlock {
    dim: usize,
    constant: Vec<f64>,
    /// Permuted variable indices.
    vars: Vec<usize>,
    /// Upper-triangle entries `(p, q, w)` with `w = value` off the diagonal
    /// and `value / 2` on it, so `<A, B> = 2 * sum w B_pq` for symmetric B.
    entries: Vec<Vec<(usize, usize, f64)>>,
}

impl PreparedBlock {
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for (v, ents) in self.vars.iter().zip(&self.entries) {
            let yv = y[*v];
            if yv == 0.0 {
                continue;
            }
            for &(p, q, w) in ents {
                let val = if p == q { 2.0 * w } else { w };
                out[p * n + q] += yv * val;
                if p != q {
                    out[q * n + p] += yv * val;
                }
            }
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for (v, ents) in self.vars.iter().zip(&self.entries) {
            let mut s = 0.0;
            for &(p, q, w) in ents {
                s += w * x[p * n + q];
            }
            out[*v] += 2.0 * s;
        }
    }

    /// Adds this block's contribution `<A_i, W A_k W>` to the upper triangle
    /// of the Schur matrix.
    fn add_schur(&self, w: &[f64], m: &mut [f64], dim_m: usize) {
        let n = self.dim;
        let t = self.vars.len();
        for a in 0..t {
            let va = self.vars[a];
            let ea = &self.entries[a];
            for b in 0..=a {
                let vb = self.vars[b];
                let eb = &self.entries[b];
                let mut s = 0.0;
                for &(p, q, wa) in ea {
                    let wp = &w[p * n..(p + 1) * n];
                    let wq = &w[q * n..(q + 1) * n];
                    let mut inner = 0.0;
                    for &(r, u, wb) in eb {
                        inner += wb * (wp[r] * wq[u] + wp[u] * wq[r]);
                    }
                    s += wa * inner;
                }
                let (lo, hi) = if va <= vb { (va, vb) } else { (vb, va) };
                m[lo * dim_m + hi] += 2.0 * s;
            }
        }
    }
}

/// NT scaling of one block: `W = G G^T`, `G^T Z G = G^-1 X G^-T = diag(lambda)`.
struct Scaling {
    g: Vec<f64>,
    g_inv: Vec<f64>,
    w: Vec<f64>,
    lambda: Vec<f64>,
}

fn nt_scaling(x: &[f64], z: &[f64], n: usize) -> Option<Scaling> {
    if n == 1 {
        let (x, z) = (x[0], z[0]);
        if !(x > 0.0 && z > 0.0 && x.is_finite() && z.is_finite()) {
            return None;
        }
        let g = (x / z).sqrt().sqrt();
        return Some(Scaling {
            g: vec![g],
            g_inv: vec![1.0 / g],
            w: vec![g * g],
            lambda: vec![(x * z).sqrt()],
        });
    }
    let l = dense::cholesky(x, n)?;
    let lt = dense::transpose(&l, n);
    // L^T Z L = Q D^2 Q^T
    let core = dense::symmetrize(&dense::matmul(&dense::matmul(&lt, z, n), &l, n), n);
    let (d2, q) = symmetric_eig(&core, n);
    if d2.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return None;
    }
    let lambda: Vec<f64> = d2.iter().map(|v| v.sqrt()).collect();
    let lq = dense::matmul(&l, &q, n);
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = lq[i * n + j] / lambda[j].sqrt();
        }
    }
    let l_inv = dense::lower_inverse(&l, n);
    let qt = dense::transpose(&q, n);
    let qt_linv = dense::matmul(&qt, &l_inv, n);
    let mut g_inv = vec![0.0; n * n];
    for i in 0..n {
        let s = lambda[i].sqrt();
        for j in 0..n {
            g_inv[i * n + j] = s * qt_linv[i * n + j];
        }
    }
    let gt = dense::transpose(&g, n);
    let w = dense::symmetrize(&dense::matmul(&g, &gt, n), n);
    Some(Scaling {
        g,
        g_inv,
        w,
        lambda,
    })
}

/// Largest `alpha` keeping `diag(lambda) + alpha * d` PSD (capped at 1e30).
fn max_step(lambda: &[f64], d: &[f64], n: usize) -> f64 {
    let min = if n == 1 {
        d[0] / lambda[0]
    } else {
        let mut scaled = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                scaled[i * n + j] = d[i * n + j] / (lambda[i] * lambda[j]).sqrt();
            }
        }
        symmetric_eigenvalues(&scaled, n)[0]
    };
    if min >= 0.0 {
        1e30
    } else {
        -1.0 / min
    }
}

struct Direction {
    dx: Vec<Vec<f64>>,
    dy: Vec<f64>,
    dz: Vec<Vec<f64>>,
}

struct Workspace<'a> {
    blocks: &'a [PreparedBlock],
    m: usize,
}

impl Workspace<'_> {
    fn apply(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (blk, x) in self.blocks.iter().zip(xs) {
            blk.apply(x, &mut out);
        }
        out
    }

    fn adjoint(&self, y: &[f64]) -> Vec<Vec<f64>> {
        self.blocks
            .iter()
            .map(|blk| {
                let mut out = vec![0.0; blk.dim * blk.dim];
                blk.apply_adjoint(y, &mut out);
                out
            })
            .collect()
    }

    fn direction(
        &self,
        chol: &SparseCholesky,
        scalings: &[Scaling],
        rp: &[f64],
        rd: &[Vec<f64>],
        rc: &[Vec<f64>],
    ) -> Direction {
        // W Rd W - Rc
        let tmp: Vec<Vec<f64>> = self
            .blocks
            .iter()
            .zip(scalings)
            .zip(rd.iter().zip(rc))
            .map(|((blk, sc), (rdj, rcj))| {
                let n = blk.dim;
                let wrw = dense::congruence(&sc.w, rdj, n);
                wrw.iter().zip(rcj).map(|(a, b)| a - b).collect()
            })
            .collect();
        let at = self.apply(&tmp);
        let rhs: Vec<f64> = rp.iter().zip(&at).map(|(a, b)| a + b).collect();
        let dy = chol.solve(&rhs);
        let aty = self.adjoint(&dy);
        let dz: Vec<Vec<f64>> = rd
            .iter()
            .zip(&aty)
            .map(|(r, a)| r.iter().zip(a).map(|(x, y)| x - y).collect())
            .collect();
        let dx: Vec<Vec<f64>> = self
            .blocks
            .iter()
            .zip(scalings)
            .zip(rc.iter().zip(&dz))
            .map(|((blk, sc), (rcj, dzj))| {
                let n = blk.dim;
                let wzw = dense::congruence(&sc.w, dzj, n);
                let d: Vec<f64> = rcj.iter().zip(&wzw).map(|(a, b)| a - b).collect();
                dense::symmetrize(&d, n)
            })
            .collect();
        Direction { dx, dy, dz }
    }
}

fn frob(blocks: &[Vec<f64>]) -> f64 {
    blocks
        .iter()
        .map(|b| b.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves a standard-form SDP.
pub fn solve_standard(problem: &StandardForm, options: &IpmOptions) -> Result<StandardSolution> {
    let m = problem.num_vars;
    if problem.objective.len() != m {
        return Err(Error::MalformedProblem(format!(
            "objective has {} entries for {} variables",
            problem.objective.len(),
            m
        )));
    }
    if problem.blocks.is_empty() {
        return Err(Error::MalformedProblem("no semidefinite blocks".into()));
    }

    // Order variables by how many blocks they touch so the Schur complement
    // factorization keeps its sparsity.
    let mut touches = vec![0usize; m];
    for blk in &problem.blocks {
        for (v, _) in &blk.coefficients {
            if *v >= m {
                return Err(Error::MalformedProblem(format!("variable {v} out of range")));
            }
            touches[*v] += 1;
        }
    }
    if let Some(v) = touches.iter().position(|&t| t == 0) {
        return Err(Error::MalformedProblem(format!(
            "variable {v} appears in no block"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&v| (touches[v], v));
    let mut perm = vec![0usize; m];
    for (pos, &v) in order.iter().enumerate() {
        perm[v] = pos;
    }

    let blocks: Vec<PreparedBlock> = problem
        .blocks
        .iter()
        .map(|blk| PreparedBlock {
            dim: blk.dim,
            constant: blk.constant.to_dense(blk.dim),
            vars: blk.coefficients.iter().map(|(v, _)| perm[*v]).collect(),
            entries: blk
                .coefficients
                .iter()
                .map(|(_, a)| {
                    a.entries()
                        .iter()
                        .map(|&(p, q, v)| (p, q, if p == q { 0.5 * v } else { v }))
                        .collect()
                })
                .collect(),
        })
        .collect();
    let b: Vec<f64> = (0..m).map(|pos| problem.objective[order[pos]]).collect();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); m];
    for blk in &blocks {
        for &va in &blk.vars {
            adjacency[va].extend(blk.vars.iter().copied().filter(|&vb| vb > va));
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
        adj.dedup();
    }
    let pattern = CholeskyPattern::analyze(&adjacency);
    let mut schur_buf = vec![0.0; m * m];
    let ws = Workspace { blocks: &blocks, m };
    let n_total: usize = blocks.iter().map(|b| b.dim).sum();
    let c_norm = frob(&blocks.iter().map(|b| b.constant.clone()).collect::<Vec<_>>());
    let b_norm = norm2(&b);

    // Starting point.
    let mut y = vec![0.0; m];
    let mut z: Vec<Vec<f64>> = Vec::new();
    let mut warm = false;
    if let Some(y0) = &options.initial_y {
        if y0.len() != m {
            return Err(Error::MalformedProblem("initial point has wrong length".into()));
        }
        let yp: Vec<f64> = (0..m).map(|pos| y0[order[pos]]).collect();
        let aty = ws.adjoint(&yp);
        let zc: Vec<Vec<f64>> = blocks
            .iter()
            .zip(&aty)
            .map(|(blk, a)| blk.constant.iter().zip(a).map(|(c, v)| c - v).collect())
            .collect();
        if blocks
            .iter()
            .zip(&zc)
            .all(|(blk, zj)| dense::cholesky(zj, blk.dim).is_some())
        {
            y = yp;
            z = zc;
            warm = true;
        }
    }
    let a_norm_max = blocks
        .iter()
        .flat_map(|blk| blk.entries.iter())
        .map(|e| e.iter().map(|(_, _, w)| w * w).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if !warm {
        let eta = 10f64
            .max((n_total as f64).sqrt())
            .max(c_norm)
            .max(a_norm_max);
        z = blocks.iter().map(|blk| scaled_identity(blk.dim, eta)).collect();
    }
    let xi = options.initial_x_scale.unwrap_or_else(|| {
        10f64.max((n_total as f64).sqrt()).max(
            b.iter()
                .map(|bi| (1.0 + bi.abs()) / (1.0 + a_norm_max))
                .fold(0.0, f64::max),
        )
    });
    let mut x: Vec<Vec<f64>> = blocks.iter().map(|blk| scaled_identity(blk.dim, xi)).collect();

    let mut history = Vec::new();
    let mut status = SolveStatus::NumericalLimit;
    let mut iterations = 0;
    let mut best: Option<(f64, Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>)> = None;
    let mut best_iter = 0;

    for iter in 0..options.max_iter {
        iterations = iter;
        let ax = ws.apply(&x);
        let rp: Vec<f64> = b.iter().zip(&ax).map(|(bi, a)| bi - a).collect();
        let aty = ws.adjoint(&y);
        let rd: Vec<Vec<f64>> = blocks
            .iter()
            .zip(z.iter().zip(&aty))
            .map(|(blk, (zj, aj))| {
                blk.constant
                    .iter()
                    .zip(zj.iter().zip(aj))
                    .map(|(c, (zz, a))| c - zz - a)
                    .collect()
            })
            .collect();
        let pobj: f64 = blocks
            .iter()
            .zip(&x)
            .map(|(blk, xj)| dense::dot(&blk.constant, xj))
            .sum();
        let dobj = dense::dot(&b, &y);
        let compl: f64 = x.iter().zip(&z).map(|(a, b)| dense::dot(a, b)).sum();
        let mu = compl / n_total as f64;
        let pinf = norm2(&rp) / (1.0 + b_norm);
        let dinf = frob(&rd) / (1.0 + c_norm);
        let relgap = (pobj - dobj).abs().max(compl) / (1.0 + pobj.abs() + dobj.abs());
        history.push(IterationRecord {
            primal_objective: pobj,
            dual_objective: dobj,
            primal_infeasibility: pinf,
            dual_infeasibility: dinf,
            complementarity: compl,
        });

        let merit = relgap.max(pinf).max(dinf);
        if best.as_ref().map_or(true, |(bm, ..)| merit < *bm) {
            best = Some((merit, x.clone(), y.clone(), z.clone()));
            best_iter = iter;
        }
        if merit < options.tol {
            status = SolveStatus::Optimal;
            break;
        }
        // Near the optimum the Schur system loses accuracy and iterates can
        // drift away; stop once progress has clearly ended.
        let best_merit = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if best_merit < STALL_MERIT
            && (iter - best_iter >= STALL_ITERS || merit > 1e3 * best_merit)
        {
            break;
        }

        // Infeasibility certificates.
        if pobj < 0.0 && norm2(&ax) < options.tol * -pobj && frob(&x) > 1e8 {
            return Err(Error::Infeasible(
                "dual constraints admit no point (primal ray found)".into(),
            ));
        }
        let aty_norm = frob(&aty);
        if dobj > 0.0 && norm2(&y) > 1e8 && {
            // -A^T y nearly PSD relative to the objective growth
            let neg_part: f64 = blocks
                .iter()
                .zip(&aty)
                .map(|(blk, a)| {
                    let vals = symmetric_eigenvalues(a, blk.dim);
                    vals.last().copied().unwrap_or(0.0).max(0.0)
                })
                .fold(0.0, f64::max);
            neg_part < options.tol * dobj && aty_norm > 0.0
        } {
            return Err(Error::Infeasible(
                "primal constraints admit no point (dual ray found)".into(),
            ));
        }

        let scalings: Option<Vec<Scaling>> = blocks
            .iter()
            .zip(x.iter().zip(&z))
            .map(|(blk, (xj, zj))| nt_scaling(xj, zj, blk.dim))
            .collect();
        let Some(scalings) = scalings else {
            break;
        };

        let mut schur = std::mem::take(&mut schur_buf);
        pattern.clear(&mut schur);
        for (blk, sc) in blocks.iter().zip(&scalings) {
            blk.add_schur(&sc.w, &mut schur, m);
        }
        let chol = SparseCholesky::factor(schur, &pattern);

        // Predictor.
        let rc_aff: Vec<Vec<f64>> = x.iter().map(|xj| xj.iter().map(|v| -v).collect()).collect();
        let aff = ws.direction(&chol, &scalings, &rp, &rd, &rc_aff);
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        let mut scaled_dx = Vec::with_capacity(blocks.len());
        let mut scaled_dz = Vec::with_capacity(blocks.len());
        for (j, (blk, sc)) in blocks.iter().zip(&scalings).enumerate() {
            let n = blk.dim;
            let gt = dense::transpose(&sc.g, n);
            let dxs = dense::congruence(&sc.g_inv, &aff.dx[j], n);
            let dzs = dense::congruence(&gt, &aff.dz[j], n);
            ap = ap.min(max_step(&sc.lambda, &dxs, n));
            ad = ad.min(max_step(&sc.lambda, &dzs, n));
            scaled_dx.push(dxs);
            scaled_dz.push(dzs);
        }
        let ap_aff = ap.min(1.0);
        let ad_aff = ad.min(1.0);
        let mut compl_aff = 0.0;
        for j in 0..blocks.len() {
            let xa: Vec<f64> = x[j].iter().zip(&aff.dx[j]).map(|(a, d)| a + ap_aff * d).collect();
            let za: Vec<f64> = z[j].iter().zip(&aff.dz[j]).map(|(a, d)| a + ad_aff * d).collect();
            compl_aff += dense::dot(&xa, &za);
        }
        let mu_aff = compl_aff / n_total as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let rc: Vec<Vec<f64>> = blocks
            .iter()
            .zip(&scalings)
            .enumerate()
            .map(|(j, (blk, sc))| {
                let n = blk.dim;
                let prod = dense::matmul(&scaled_dx[j], &scaled_dz[j], n);
                let mut s = vec![0.0; n * n];
                for a in 0..n {
                    for c in 0..n {
                        let mut rhs = -0.5 * (prod[a * n + c] + prod[c * n + a]);
                        if a == c {
                            rhs += sigma * mu - sc.lambda[a] * sc.lambda[a];
                        }
                        s[a * n + c] = 2.0 * rhs / (sc.lambda[a] + sc.lambda[c]);
                    }
                }
                dense::congruence(&sc.g, &s, n)
            })
            .collect();
        let dir = ws.direction(&chol, &scalings, &rp, &rd, &rc);
        schur_buf = chol.into_buffer();

        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for (j, (blk, sc)) in blocks.iter().zip(&scalings).enumerate() {
            let n = blk.dim;
            let gt = dense::transpose(&sc.g, n);
            ap = ap.min(max_step(&sc.lambda, &dense::congruence(&sc.g_inv, &dir.dx[j], n), n));
            ad = ad.min(max_step(&sc.lambda, &dense::congruence(&gt, &dir.dz[j], n), n));
        }
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }
        for j in 0..blocks.len() {
            for (v, d) in x[j].iter_mut().zip(&dir.dx[j]) {
                *v += ap * d;
            }
            for (v, d) in z[j].iter_mut().zip(&dir.dz[j]) {
                *v += ad * d;
            }
        }
        for (v, d) in y.iter_mut().zip(&dir.dy) {
            *v += ad * d;
        }
        iterations = iter + 1;
    }

    let best_merit = best.as_ref().map_or(f64::INFINITY, |b| b.0);
    if status != SolveStatus::Optimal {
        if let Some((_, bx, by, bz)) = best {
            x = bx;
            y = by;
            z = bz;
        }
    }
    let _ = z;

    // Final report from y directly so the dual slack is exact.
    let aty = ws.adjoint(&y);
    let z_exact: Vec<Vec<f64>> = blocks
        .iter()
        .zip(&aty)
        .map(|(blk, a)| blk.constant.iter().zip(a).map(|(c, v)| c - v).collect())
        .collect();
    let ax = ws.apply(&x);
    let rp: Vec<f64> = b.iter().zip(&ax).map(|(bi, a)| bi - a).collect();
    let pobj: f64 = blocks
        .iter()
        .zip(&x)
        .map(|(blk, xj)| dense::dot(&blk.constant, xj))
        .sum();
    let dobj = dense::dot(&b, &y);
    let min_eig_z = blocks
        .iter()
        .zip(&z_exact)
        .map(|(blk, zj)| symmetric_eigenvalues(zj, blk.dim)[0])
        .fold(f64::INFINITY, f64::min);

    if status != SolveStatus::Optimal && best_merit >= STALL_MERIT {
        return Err(Error::IterationLimit {
            gap: pobj - dobj,
        });
    }

    let y_orig: Vec<f64> = (0..m).map(|v| y[perm[v]]).collect();
    Ok(StandardSolution {
        x,
        y: y_orig,
        z: z_exact,
        primal_objective: pobj,
        dual_objective: dobj,
        primal_infeasibility: norm2(&rp) / (1.0 + b_norm),
        dual_infeasibility: (-min_eig_z).max(0.0),
        iterations,
        status,
        history,
    })
}

const STALL_MERIT: f64 = 1e-5;
const STALL_ITERS: usize = 6;

fn scaled_identity(n: usize, s: f64) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        out[k * n + k] = s;
    }
    out
}
