/// Sparse real symmetric matrix holding upper-triangle entries `(p, q, v)`
/// with `p <= q`; `v` stands for both `(p, q)` and `(q, p)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseSym {
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `v` at `(p, q)` and its mirror. Order of the indices is irrelevant.
    pub fn push(&mut self, p: usize, q: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        self.entries.push((p, q, v));
    }

    /// Sums repeated positions and drops exact zeros.
    pub fn compact(&mut self) {
        self.entries.sort_by_key(|&(p, q, _)| (p, q));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(p, q, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == p && last.1 == q => last.2 += v,
                _ => out.push((p, q, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        self.entries = out;
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for &(p, q, v) in &self.entries {
            out[p * n + q] += v;
            if p != q {
                out[q * n + p] += v;
            }
        }
        out
    }
}
