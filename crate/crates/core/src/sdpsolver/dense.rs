//! Small dense real kernels for the interior-point iterations.
//!
//! Matrices are row-major `Vec<f64>` with an explicit dimension. Block sizes
//! here are tiny (a few dozen at most), so plain loops are used throughout.

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

/// Inverse of a lower-triangular matrix.
pub fn lower_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    for j in 0..n {
        inv[j * n + j] = 1.0 / l[j * n + j];
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l[i * n + k] * inv[k * n + j];
            }
            inv[i * n + j] = s / l[i * n + i];
        }
    }
    inv
}

pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

pub fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = a[i * n + j];
        }
    }
    out
}

/// `a * b * a^T`.
pub fn congruence(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a[0] * a[0] * b[0]];
    }
    let ab = matmul(a, b, n);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row = &ab[i * n..(i + 1) * n];
        for j in 0..=i {
            let aj = &a[j * n..(j + 1) * n];
            let v: f64 = row.iter().zip(aj).map(|(x, y)| x * y).sum();
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

pub fn symmetrize(a: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = 0.5 * (a[i * n + j] + a[j * n + i]);
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
pub fn identity(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        out[k * n + k] = 1.0;
    }
    out
}

/// Fill pattern of a Cholesky factor, computed once per sparsity structure.
#[derive(Clone, Debug)]
pub struct CholeskyPattern {
    n: usize,
    /// Rows `i > k` with `L(i, k)` structurally nonzero, ascending.
    below: Vec<Vec<usize>>,
    /// `below[k]` split into runs of consecutive rows: `(position, first row, length)`.
    runs: Vec<Vec<(usize, usize, usize)>>,
}

impl CholeskyPattern {
    /// `adjacency[k]` lists the columns coupled to `k` in the matrix.
    pub fn analyze(adjacency: &[Vec<usize>]) -> Self {
        let n = adjacency.len();
        let mut below: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut mark = vec![usize::MAX; n];
        for k in 0..n {
            let mut rows = Vec::new();
            for &i in &adjacency[k] {
                if i > k && mark[i] != k {
                    mark[i] = k;
                    rows.push(i);
                }
            }
            for &c in &children[k] {
                for &i in &below[c] {
                    if i > k && mark[i] != k {
                        mark[i] = k;
                        rows.push(i);
                    }
                }
            }
            rows.sort_unstable();
            if let Some(&parent) = rows.first() {
                children[parent].push(k);
            }
            below[k] = rows;
        }
        let runs = below
            .iter()
            .map(|rows| {
                let mut out: Vec<(usize, usize, usize)> = Vec::new();
                for (pos, &i) in rows.iter().enumerate() {
                    match out.last_mut() {
                        Some((_, first, len)) if *first + *len == i => *len += 1,
                        _ => out.push((pos, i, 1)),
                    }
                }
                out
            })
            .collect();
        Self { n, below, runs }
    }

    /// Zeroes every position a factorization with this pattern can touch.
    pub fn clear(&self, a: &mut [f64]) {
        let n = self.n;
        for (k, rows) in self.below.iter().enumerate() {
            a[k * n + k] = 0.0;
            for &i in rows {
                a[k * n + i] = 0.0;
            }
        }
    }
}

/// Cholesky factor of a sparse symmetric positive (semi)definite matrix held
/// densely. Pivots that collapse numerically are replaced by a huge value,
/// which drops the matching direction instead of failing.
#[derive(Clone, Debug)]
pub struct SparseCholesky<'p> {
    pattern: &'p CholeskyPattern,
    /// Row-major upper triangle: `u[k * n + i] = L(i, k)` for `i >= k`.
    u: Vec<f64>,
}

impl<'p> SparseCholesky<'p> {
    /// Factors the matrix whose upper triangle is stored row-major in `a`.
    pub fn factor(mut a: Vec<f64>, pattern: &'p CholeskyPattern) -> Self {
        let n = pattern.n;
        let max_diag = (0..n).map(|k| a[k * n + k].abs()).fold(0.0, f64::max);
        let floor = 1e-30 * max_diag.max(1e-300);
        let mut col = Vec::new();
        for k in 0..n {
            let mut d = a[k * n + k];
            if d <= floor || !d.is_finite() {
                d = 1e128;
            }
            let d = d.sqrt();
            a[k * n + k] = d;
            let rows = &pattern.below[k];
            col.clear();
            col.extend(rows.iter().map(|&i| a[k * n + i] / d));
            for (&i, &v) in rows.iter().zip(&col) {
                a[k * n + i] = v;
            }
            // L(i, j) -= L(i, k) L(j, k), updated one row of U at a time.
            let runs = &pattern.runs[k];
            for (jb, &j) in rows.iter().enumerate() {
                let ljk = col[jb];
                if ljk == 0.0 {
                    continue;
                }
                let row = &mut a[j * n..(j + 1) * n];
                for &(pos, first, len) in runs {
                    if pos + len <= jb {
                        continue;
                    }
                    let skip = jb.saturating_sub(pos);
                    let dst = &mut row[first + skip..first + len];
                    let src = &col[pos + skip..pos + len];
                    for (d, &v) in dst.iter_mut().zip(src) {
                        *d -= v * ljk;
                    }
                }
            }
        }
        Self { pattern, u: a }
    }

    /// Returns the storage for reuse.
    pub fn into_buffer(self) -> Vec<f64> {
        self.u
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.pattern.n;
        let u = &self.u;
        let mut x = b.to_vec();
        for k in 0..n {
            x[k] /= u[k * n + k];
            let xk = x[k];
            for &(_, first, len) in &self.pattern.runs[k] {
                let lk = &u[k * n + first..k * n + first + len];
                for (xi, &l) in x[first..first + len].iter_mut().zip(lk) {
                    *xi -= l * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for &(_, first, len) in &self.pattern.runs[k] {
                let lk = &u[k * n + first..k * n + first + len];
                s -= lk.iter().zip(&x[first..first + len]).map(|(l, v)| l * v).sum::<f64>();
            }
            x[k] = s / u[k * n + k];
        }
        x
    }
}
