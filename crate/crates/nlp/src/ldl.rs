//! Sparse LDLᵀ for symmetric indefinite matrices with 1×1 pivots.
//!
//! The symbolic phase (ordering, elimination tree, column counts) is done once per
//! sparsity pattern; numeric factorizations reuse it.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

/// Symmetric matrix in compressed-column form holding both triangles.
#[derive(Clone, Debug, PartialEq)]
pub struct SymCsc {
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SymCsc {
    /// Builds the full pattern from lower-or-upper triangle coordinates. Duplicates
    /// collapse into one entry; the returned map sends each input coordinate to the
    /// slots (one or two) its value must be added to.
    pub fn from_pattern(n: usize, entries: &[(usize, usize)]) -> (Self, Vec<[usize; 2]>) {
        let mut cols: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(i, j) in entries {
            assert!(i < n && j < n, "entry ({i}, {j}) outside {n}×{n}");
            cols[j].insert(i);
            cols[i].insert(j);
        }
        let mut colptr = vec![0; n + 1];
        let mut rowidx = Vec::new();
        for (j, c) in cols.iter().enumerate() {
            rowidx.extend(c.iter().copied());
            colptr[j + 1] = rowidx.len();
        }
        let m = SymCsc { n, colptr, rowidx, values: vec![0.0; 0] };
        let map = entries
            .iter()
            .map(|&(i, j)| {
                let a = m.slot(i, j).unwrap();
                let b = if i == j { usize::MAX } else { m.slot(j, i).unwrap() };
                [a, b]
            })
            .collect();
        let nnz = m.rowidx.len();
        (SymCsc { values: vec![0.0; nnz], ..m }, map)
    }

    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let r = &self.rowidx[self.colptr[j]..self.colptr[j + 1]];
        r.binary_search(&i).ok().map(|k| self.colptr[j] + k)
    }

    /// Adds `v` at a coordinate map entry from [`SymCsc::from_pattern`].
    pub fn add(&mut self, slots: [usize; 2], v: f64) {
        self.values[slots[0]] += v;
        if slots[1] != usize::MAX {
            self.values[slots[1]] += v;
        }
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            for p in self.colptr[j]..self.colptr[j + 1] {
                y[self.rowidx[p]] += self.values[p] * x[j];
            }
        }
        y
    }
}

/// Minimum-degree ordering on the graph of a symmetric pattern. Ties go to the
/// lowest index so the result is deterministic.
pub fn minimum_degree(a: &SymCsc) -> Vec<usize> {
    let n = a.n;
    let mut adj: Vec<BTreeSet<usize>> =
        (0..n).map(|j| a.rowidx[a.colptr[j]..a.colptr[j + 1]].iter().copied().filter(|&i| i != j).collect()).collect();
    let mut done = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|j| Reverse((adj[j].len(), j))).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some(Reverse((deg, v))) = heap.pop() {
        if done[v] || deg != adj[v].len() {
            continue;
        }
        done[v] = true;
        perm.push(v);
        let nb: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &u in &nb {
            adj[u].remove(&v);
        }
        for (k, &u) in nb.iter().enumerate() {
            for &w in &nb[k + 1..] {
                if adj[u].insert(w) {
                    adj[w].insert(u);
                }
            }
        }
        for &u in &nb {
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    perm
}

/// Ordering and elimination tree for one sparsity pattern.
#[derive(Clone, Debug)]
pub struct Symbolic {
    pub n: usize,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    parent: Vec<usize>,
    lp: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl Symbolic {
    pub fn analyze(a: &SymCsc) -> Self {
        Self::with_ordering(a, minimum_degree(a))
    }

    pub fn with_ordering(a: &SymCsc, perm: Vec<usize>) -> Self {
        let n = a.n;
        assert_eq!(perm.len(), n);
        let mut pinv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        let mut parent = vec![NONE; n];
        let mut flag = vec![0; n];
        let mut lnz = vec![0; n];
        for k in 0..n {
            flag[k] = k;
            let kk = perm[k];
            for p in a.colptr[kk]..a.colptr[kk + 1] {
                let mut i = pinv[a.rowidx[p]];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == NONE {
                            parent[i] = k;
                        }
                        lnz[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut lp = vec![0; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        Symbolic { n, perm, pinv, parent, lp }
    }

    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Numeric factorization `P A Pᵀ = L D Lᵀ`. Fails on an exactly zero or
    /// non-finite pivot, returning its position.
    pub fn factor(&self, a: &SymCsc) -> Result<Factor, usize> {
        let n = self.n;
        let mut li = vec![0; self.factor_nnz()];
        let mut lx = vec![0.0; self.factor_nnz()];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0; n];
        let mut flag = vec![0; n];
        let mut lnz = vec![0; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let kk = self.perm[k];
            for p in a.colptr[kk]..a.colptr[kk + 1] {
                let mut i = self.pinv[a.rowidx[p]];
                if i <= k {
                    y[i] += a.values[p];
                    let mut len = 0;
                    while flag[i] != k {
                        pattern[len] = i;
                        len += 1;
                        flag[i] = k;
                        i = self.parent[i];
                    }
                    while len > 0 {
                        len -= 1;
                        top -= 1;
                        pattern[top] = pattern[len];
                    }
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let p2 = self.lp[i] + lnz[i];
                for p in self.lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                lnz[i] += 1;
            }
            if d[k] == 0.0 || !d[k].is_finite() {
                return Err(k);
            }
        }
        Ok(Factor { perm: self.perm.clone(), lp: self.lp.clone(), li, lx, d })
    }
}

#[derive(Clone, Debug)]
pub struct Factor {
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    pub d: Vec<f64>,
}

impl Factor {
    /// Number of negative pivots, equal to the number of negative eigenvalues.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut x: Vec<f64> = (0..n).map(|k| b[self.perm[k]]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![0.0; n];
        for k in 0..n {
            out[self.perm[k]] = x[k];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arrow(n: usize) -> (SymCsc, Vec<[usize; 2]>, Vec<f64>) {
        // dense first row/column, diagonal elsewhere; natural order fills in completely
        let mut e = vec![];
        let mut v = vec![];
        for i in 0..n {
            e.push((i, i));
            v.push(if i == 0 { n as f64 } else { -1.0 - i as f64 });
            if i > 0 {
                e.push((i, 0));
                v.push(0.5);
            }
        }
        let (m, map) = SymCsc::from_pattern(n, &e);
        (m, map, v)
    }

    #[test]
    fn arrow_matrix_orders_hub_last_and_solves() {
        let (mut a, map, v) = arrow(30);
        for (s, x) in map.iter().zip(&v) {
            a.add(*s, *x);
        }
        let sym = Symbolic::analyze(&a);
        assert_eq!(sym.factor_nnz(), 29);
        let f = sym.factor(&a).unwrap();
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x);
        let got = f.solve(&b);
        for i in 0..30 {
            assert!((got[i] - x[i]).abs() < 1e-12);
        }
        assert_eq!(f.negative_pivots(), 29);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let (mut a, map) = SymCsc::from_pattern(2, &[(0, 0), (1, 0), (1, 1)]);
        a.add(map[1], 1.0);
        assert!(Symbolic::with_ordering(&a, vec![0, 1]).factor(&a).is_err());
    }
}
