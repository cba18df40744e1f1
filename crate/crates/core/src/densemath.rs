//! Dense complex linear algebra over qubit registers.
//!
//! Basis convention: qubit 0 is the most significant bit of a computational
//! basis index, so for three qubits `|q0 q1 q2>` has index `4*q0 + 2*q1 + q2`.
//! Every routine here uses that convention.
//!
//! All operations are value-to-value; inputs are never mutated.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Square dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m[(k, k)] = ONE;
        }
        m
    }

    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::LengthMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from nested rows of real entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend(row.iter().map(|&x| C64::new(x, 0.0)));
        }
        Ok(Self { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (k, &d) in diag.iter().enumerate() {
            m[(k, k)] = C64::new(d, 0.0);
        }
        m
    }

    /// `|psi><psi|` for an amplitude vector.
    pub fn outer(psi: &[C64]) -> Self {
        Self::from_fn(psi.len(), |r, c| psi[r] * psi[c].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    /// Number of qubits for a `2^n x 2^n` matrix.
    pub fn num_qubits(&self) -> Result<usize> {
        qubits_for_dim(self.dim)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|k| self[(k, k)]).sum()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for r in 0..n {
            let row = &self.data[r * n..(r + 1) * n];
            let out_row = &mut out[r * n..(r + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let other_row = &other.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        Self { dim: n, data: out }
    }

    /// `u * self * u^dagger`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        u.matmul(self).matmul(&u.adjoint())
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.dim, v.len(), "apply dimension mismatch");
        (0..self.dim)
            .map(|r| {
                self.data[r * self.dim..(r + 1) * self.dim]
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `<u| self |v>`.
    pub fn sandwich(&self, u: &[C64], v: &[C64]) -> C64 {
        let mv = self.apply(v);
        u.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |M - M^dagger|` over entries.
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol
    }

    /// Largest entry-wise deviation from `other`.
    pub fn max_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `(M + M^dagger) / 2`, removing rounding asymmetry.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5)
    }

    /// Real part of `Tr(self * other)`.
    pub fn trace_product_re(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                acc += (self[(r, c)] * other[(c, r)]).re;
            }
        }
        acc
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|k| self[(k, k)]).collect()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for r in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|c| {
                    let z = self[(r, c)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

pub fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Kronecker product; the left factor is the slow index.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (na, nb) = (a.dim(), b.dim());
    ComplexMatrix::from_fn(na * nb, |r, c| a[(r / nb, c / nb)] * b[(r % nb, c % nb)])
}

/// Kronecker product of amplitude vectors.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

/// Spectrum and eigenvectors of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        let n = self.eigenvectors.dim();
        (0..n).map(|r| self.eigenvectors[(r, k)]).collect()
    }

    /// `V diag(f(lambda)) V^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let n = v.dim();
        let vals: Vec<f64> = self.eigenvalues.iter().map(|&x| f(x)).collect();
        ComplexMatrix::from_fn(n, |r, c| {
            (0..n)
                .map(|k| v[(r, k)] * v[(c, k)].conj() * vals[k])
                .sum()
        })
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<HermitianEig> {
    let scale = h.max_abs();
    let residual = h.hermitian_residual();
    if residual > 1e-10 * scale.max(1.0) {
        return Err(Error::NonHermitianInput { residual });
    }
    let n = h.dim();
    let mut a = h.hermitian_part();
    let mut v = ComplexMatrix::identity(n);

    let total_norm = a.frobenius_norm();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a[(r, c)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total_norm || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                if g <= 1e-300 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Phase that makes the (p, q) entry real and positive.
                let phase = apq / g;
                let tau = (aqq - app) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // Rotation V = diag(1, conj(phase)) * [[cs, sn], [-sn, cs]].
                let vpp = C64::new(cs, 0.0);
                let vpq = C64::new(sn, 0.0);
                let vqp = -phase.conj() * sn;
                let vqq = phase.conj() * cs;
                // Columns: A <- A V.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * vpp + akq * vqp;
                    a[(k, q)] = akp * vpq + akq * vqq;
                }
                // Rows: A <- V^dagger A.
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = vpp.conj() * apk + vqp.conj() * aqk;
                    a[(q, k)] = vpq.conj() * apk + vqq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * vpp + vkq * vqp;
                    v[(k, q)] = vkp * vpq + vkq * vqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(x, x)].re.total_cmp(&a[(y, y)].re));
    let eigenvalues = order.iter().map(|&k| a[(k, k)].re).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, |r, c| v[(r, order[c])]);
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(h: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eig(h)?.eigenvalues)
}

/// Real symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// `a` is row-major `n x n`. Returns ascending eigenvalues and the
/// row-major eigenvector matrix (eigenvectors in columns).
pub fn symmetric_eig(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut a: Vec<f64> = (0..n * n)
        .map(|k| 0.5 * (a[k] + a[(k % n) * n + k / n]))
        .collect();
    let mut v = vec![0.0; n * n];
    for k in 0..n {
        v[k * n + k] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        let off = (2.0 * off).sqrt();
        if off <= 1e-15 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].total_cmp(&a[y * n + y]));
    let vals = order.iter().map(|&k| a[k * n + k]).collect();
    let mut vecs = vec![0.0; n * n];
    for (c, &k) in order.iter().enumerate() {
        for r in 0..n {
            vecs[r * n + c] = v[r * n + k];
        }
    }
    (vals, vecs)
}

/// Eigenvalues of a real symmetric matrix in ascending order.
///
/// Householder reduction to tridiagonal form followed by implicit QL; much
/// cheaper than [`symmetric_eig`] when the vectors are not needed.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n);
    match n {
        0 => return Vec::new(),
        1 => return vec![a[0]],
        2 => {
            let (p, q, r) = (a[0], 0.5 * (a[1] + a[2]), a[3]);
            let mid = 0.5 * (p + r);
            let rad = (0.5 * (p - r)).hypot(q);
            return vec![mid - rad, mid + rad];
        }
        _ => {}
    }
    let mut m: Vec<f64> = (0..n * n)
        .map(|k| 0.5 * (a[k] + a[(k % n) * n + k / n]))
        .collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n - 2 {
        d[k] = m[k * n + k];
        let norm = ((k + 1)..n).map(|i| m[i * n + k].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let x0 = m[(k + 1) * n + k];
        let alpha = if x0 > 0.0 { -norm } else { norm };
        for i in (k + 1)..n {
            v[i] = m[i * n + k];
        }
        v[k + 1] -= alpha;
        let vn = ((k + 1)..n).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
        e[k] = alpha;
        if vn == 0.0 {
            continue;
        }
        for i in (k + 1)..n {
            v[i] /= vn;
        }
        // w = A v - (v' A v) v on the trailing block
        let mut kk = 0.0;
        for i in (k + 1)..n {
            let s: f64 = ((k + 1)..n).map(|j| m[i * n + j] * v[j]).sum();
            w[i] = s;
            kk += v[i] * s;
        }
        for i in (k + 1)..n {
            w[i] -= kk * v[i];
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                m[i * n + j] -= 2.0 * (v[i] * w[j] + w[i] * v[j]);
            }
        }
    }
    d[n - 2] = m[(n - 2) * n + n - 2];
    d[n - 1] = m[(n - 1) * n + n - 1];
    e[n - 2] = m[(n - 1) * n + n - 2];
    e[n - 1] = 0.0;
    tridiagonal_ql(&mut d, &mut e);
    d.sort_by(f64::total_cmp);
    d
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
/// `e[i]` couples `d[i]` and `d[i + 1]`; on return `d` holds the eigenvalues.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l || iter == 60 {
                break;
            }
            iter += 1;
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// Sorted, validated qubit subset.
fn checked_subset(subset: &[usize], num_qubits: usize) -> Result<Vec<usize>> {
    let mut s = subset.to_vec();
    s.sort_unstable();
    for w in s.windows(2) {
        if w[0] == w[1] {
            return Err(Error::DuplicateIndex(w[0]));
        }
    }
    if let Some(&bad) = s.iter().find(|&&q| q >= num_qubits) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            num_qubits,
        });
    }
    Ok(s)
}

/// Bit mask of a qubit subset under the MSB-first convention.
pub fn qubit_mask(subset: &[usize], num_qubits: usize) -> usize {
    subset
        .iter()
        .fold(0, |m, &q| m | (1 << (num_qubits - 1 - q)))
}

/// Maps an index over the `kept` qubits (MSB-first within `kept`) and an
/// index over the remaining qubits onto full-register basis indices.
pub(crate) struct SplitIndex {
    pub kept: Vec<usize>,
    pub rest: Vec<usize>,
}

impl SplitIndex {
    pub fn new(kept_sorted: &[usize], num_qubits: usize) -> Self {
        let rest_qubits: Vec<usize> = (0..num_qubits)
            .filter(|q| !kept_sorted.contains(q))
            .collect();
        Self {
            kept: spread_table(kept_sorted, num_qubits),
            rest: spread_table(&rest_qubits, num_qubits),
        }
    }
}

fn spread_table(qubits: &[usize], num_qubits: usize) -> Vec<usize> {
    let k = qubits.len();
    (0..1usize << k)
        .map(|local| {
            let mut full = 0;
            for (pos, &q) in qubits.iter().enumerate() {
                if local >> (k - 1 - pos) & 1 == 1 {
                    full |= 1 << (num_qubits - 1 - q);
                }
            }
            full
        })
        .collect()
}

/// Reduced operator on the qubits in `keep` (returned in ascending qubit order).
pub fn partial_trace(rho: &ComplexMatrix, keep: &[usize]) -> Result<ComplexMatrix> {
    let n = rho.num_qubits()?;
    let keep = checked_subset(keep, n)?;
    if keep.len() == n {
        return Ok(rho.clone());
    }
    let split = SplitIndex::new(&keep, n);
    let dk = split.kept.len();
    Ok(ComplexMatrix::from_fn(dk, |i, j| {
        let (bi, bj) = (split.kept[i], split.kept[j]);
        split
            .rest
            .iter()
            .map(|&t| rho[(bi | t, bj | t)])
            .sum()
    }))
}

/// Reduced density matrix of a pure state on the qubits in `keep`.
pub fn reduced_density_of_vector(psi: &[C64], keep: &[usize]) -> Result<ComplexMatrix> {
    let n = qubits_for_dim(psi.len())?;
    let keep = checked_subset(keep, n)?;
    let split = SplitIndex::new(&keep, n);
    let dk = split.kept.len();
    let mut out = ComplexMatrix::zeros(dk);
    for &t in &split.rest {
        for i in 0..dk {
            let a = psi[split.kept[i] | t];
            if a == ZERO {
                continue;
            }
            for j in 0..dk {
                out[(i, j)] += a * psi[split.kept[j] | t].conj();
            }
        }
    }
    Ok(out)
}

/// Partial transpose on the qubits in `subset`.
///
/// Entries are permuted, never recomputed, so applying it twice returns the
/// input bit for bit.
pub fn partial_transpose(rho: &ComplexMatrix, subset: &[usize]) -> Result<ComplexMatrix> {
    let n = rho.num_qubits()?;
    let subset = checked_subset(subset, n)?;
    let mask = qubit_mask(&subset, n);
    Ok(partial_transpose_mask(rho, mask))
}

pub(crate) fn partial_transpose_mask(rho: &ComplexMatrix, mask: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rho.dim(), |r, c| {
        let (r2, c2) = transpose_indices(r, c, mask);
        rho[(r2, c2)]
    })
}

/// Where entry `(r, c)` moves under a partial transpose on `mask`.
#[inline]
pub fn transpose_indices(r: usize, c: usize, mask: usize) -> (usize, usize) {
    ((r & !mask) | (c & mask), (c & !mask) | (r & mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    fn bell() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::outer(&[
            C64::new(s, 0.0),
            ZERO,
            ZERO,
            C64::new(s, 0.0),
        ])
    }

    fn random_hermitian(dim: usize, seed: u64) -> ComplexMatrix {
        // Small LCG keeps this test free of extra dependencies.
        let mut state = seed;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let m = ComplexMatrix::from_fn(dim, |_, _| C64::new(next(), next()));
        (&m + &m.adjoint()).scale_real(0.5)
    }

    #[test]
    fn kron_identities() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        let a = ComplexMatrix::from_real_diag(&[1.0, 2.0]);
        let b = ComplexMatrix::from_real_diag(&[3.0, 4.0]);
        assert_eq!(kron(&a, &b), ComplexMatrix::from_real_diag(&[3.0, 4.0, 6.0, 8.0]));
    }

    #[test]
    fn kron_bit_flip_both() {
        let xx = kron(&sigma_x(), &sigma_x());
        let out = xx.apply(&[ONE, ZERO, ZERO, ZERO]);
        assert_eq!(out, vec![ZERO, ZERO, ZERO, ONE]);
    }

    #[test]
    fn kron_associative() {
        let a = random_hermitian(2, 1);
        let b = random_hermitian(4, 2);
        let c = random_hermitian(2, 3);
        let l = kron(&kron(&a, &b), &c);
        let r = kron(&a, &kron(&b, &c));
        assert!(l.max_diff(&r) < 1e-13);
    }

    #[test]
    fn eig_diagonal_and_pauli() {
        let d = ComplexMatrix::from_real_diag(&[3.0, 1.0, 2.0]);
        let e = hermitian_eig(&d).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 2.0, 3.0]);
        let e = hermitian_eig(&sigma_x()).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        for seed in 0..5 {
            let h = random_hermitian(16, seed);
            let e = hermitian_eig(&h).unwrap();
            let rebuilt = e.map_spectrum(|x| x);
            assert!(rebuilt.max_diff(&h) < 1e-10 * h.max_abs());
            let vtv = e.eigenvectors.adjoint().matmul(&e.eigenvectors);
            assert!(vtv.max_diff(&ComplexMatrix::identity(16)) < 1e-10);
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let sum: f64 = e.eigenvalues.iter().sum();
            assert!((sum - h.trace().re).abs() < 1e-10 * 16.0);
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(
            hermitian_eig(&m),
            Err(Error::NonHermitianInput { .. })
        ));
    }

    #[test]
    fn eigenvalues_only_match_jacobi() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for n in 1..=9 {
            for _ in 0..20 {
                let mut a = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..=i {
                        let x = next();
                        a[i * n + j] = x;
                        a[j * n + i] = x;
                    }
                }
                let fast = symmetric_eigenvalues(&a, n);
                let (slow, _) = symmetric_eig(&a, n);
                for (x, y) in fast.iter().zip(&slow) {
                    assert!((x - y).abs() < 1e-12, "n={n}: {fast:?} vs {slow:?}");
                }
            }
        }
        // repeated eigenvalues and an already diagonal input
        let diag = [2.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0];
        assert_eq!(symmetric_eigenvalues(&diag, 3), vec![-1.0, 2.0, 2.0]);
    }

    #[test]
    fn symmetric_eig_matches_complex_path() {
        let h = random_hermitian(8, 7);
        let re: Vec<f64> = (0..64).map(|k| h.data()[k].re).collect();
        let (vals, vecs) = symmetric_eig(&re, 8);
        let real_h = ComplexMatrix::from_fn(8, |r, c| C64::new(re[r * 8 + c], 0.0));
        let expect = hermitian_eigenvalues(&real_h).unwrap();
        for (a, b) in vals.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        // Columns are orthonormal.
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = (0..8).map(|r| vecs[r * 8 + i] * vecs[r * 8 + j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((dot - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn partial_trace_of_bell_is_maximally_mixed() {
        let r = partial_trace(&bell(), &[0]).unwrap();
        assert!(r.max_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_of_product() {
        let ra = ComplexMatrix::from_real_rows(&[&[0.7, 0.2], &[0.2, 0.3]]).unwrap();
        let rb = ComplexMatrix::from_real_rows(&[&[0.4, -0.1], &[-0.1, 0.6]]).unwrap();
        let prod = kron(&ra, &rb);
        assert!(partial_trace(&prod, &[0]).unwrap().max_diff(&ra) < 1e-15);
        assert!(partial_trace(&prod, &[1]).unwrap().max_diff(&rb) < 1e-15);
        assert_eq!(partial_trace(&prod, &[0, 1]).unwrap(), prod);
    }

    #[test]
    fn partial_trace_rejects_bad_index() {
        assert!(matches!(
            partial_trace(&bell(), &[2]),
            Err(Error::IndexOutOfRange { index: 2, .. })
        ));
    }

    #[test]
    fn vector_reduction_matches_matrix_reduction() {
        let psi: Vec<C64> = (0..8)
            .map(|k| C64::new((k as f64 + 1.0).sqrt(), 0.3 * k as f64))
            .collect();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        let full = ComplexMatrix::outer(&psi);
        for keep in [vec![0], vec![1, 2], vec![0, 2], vec![2]] {
            let a = partial_trace(&full, &keep).unwrap();
            let b = reduced_density_of_vector(&psi, &keep).unwrap();
            assert!(a.max_diff(&b) < 1e-14);
        }
    }

    #[test]
    fn partial_transpose_of_bell_spectrum() {
        let pt = partial_transpose(&bell(), &[1]).unwrap();
        let vals = hermitian_eigenvalues(&pt).unwrap();
        let expect = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in vals.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn partial_transpose_product_rule_and_identity() {
        let ra = ComplexMatrix::from_fn(2, |r, c| C64::new(0.3 + r as f64, c as f64 * 0.2));
        let rb = ComplexMatrix::from_fn(2, |r, c| C64::new(r as f64 - c as f64, 0.5 * r as f64));
        let prod = kron(&ra, &rb);
        let pt = partial_transpose(&prod, &[1]).unwrap();
        assert_eq!(pt, kron(&ra, &rb.transpose()));
        assert_eq!(partial_transpose(&prod, &[]).unwrap(), prod);
    }

    #[test]
    fn partial_transpose_is_exact_involution() {
        let h = random_hermitian(16, 11);
        for subset in [vec![0], vec![1, 3], vec![0, 1, 2, 3]] {
            let once = partial_transpose(&h, &subset).unwrap();
            assert_eq!(partial_transpose(&once, &subset).unwrap(), h);
            assert!((once.trace() - h.trace()).norm() < 1e-13);
            assert!(once.is_hermitian(1e-14));
        }
    }
}
