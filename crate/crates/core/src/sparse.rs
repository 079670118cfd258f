//! Symmetric sparse matrices in CSR form, a nested-dissection ordering, an
//! up-looking simplicial Cholesky factorization and Jacobi-preconditioned CG.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Square matrix in compressed sparse row form, both triangles stored,
/// column indices sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the matrix summing duplicates. Entries are merged by a stable
    /// sort, so duplicates are added in input order.
    pub fn from_triplets(n: usize, rows: &[usize], cols: &[usize], vals: &[f64]) -> Result<Self> {
        if rows.len() != cols.len() || rows.len() != vals.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: cols.len().min(vals.len()),
            });
        }
        if let Some(&bad) = rows.iter().chain(cols).find(|&&i| i >= n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad });
        }
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by_key(|&t| (rows[t], cols[t]));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last = None;
        for t in order {
            let key = (rows[t], cols[t]);
            if last == Some(key) {
                *values.last_mut().unwrap() += vals[t];
            } else {
                col_idx.push(cols[t]);
                values.push(vals[t]);
                row_ptr[rows[t] + 1] += 1;
                last = Some(key);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let (mut r, mut c, mut v) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] != 0.0 {
                    r.push(i);
                    c.push(j);
                    v.push(a[(i, j)]);
                }
            }
        }
        Self::from_triplets(n, &r, &c, &v).expect("indices in range")
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |p| v[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    /// `b − A x` with each row accumulated in compensated (double-double)
    /// arithmetic.
    pub fn residual_compensated(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (c, v) = self.row(i);
                let (mut hi, mut lo) = (b[i], 0.0);
                for (&j, &a) in c.iter().zip(v) {
                    let p = -a * x[j];
                    let pe = Float::mul_add(-a, x[j], -p);
                    let t = hi + p;
                    let z = t - hi;
                    lo += (hi - (t - z)) + (p - z) + pe;
                    hi = t;
                }
                hi + lo
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                d[(i, j)] = a;
            }
        }
        d
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).all(|(&j, &a)| self.get(j, i) == a)
        })
    }
}

/// Groups rows with identical pattern (diagonal included).
fn supervariables(a: &CsrMatrix) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for i in 0..a.n {
        let mut pat = a.row(i).0.to_vec();
        if pat.binary_search(&i).is_err() {
            let p = pat.partition_point(|&j| j < i);
            pat.insert(p, i);
        }
        groups.entry(pat).or_default().push(i);
    }
    let mut sv: Vec<Vec<usize>> = groups.into_values().collect();
    sv.sort_by_key(|g| g[0]);
    let mut of = vec![0; a.n];
    for (s, g) in sv.iter().enumerate() {
        for &i in g {
            of[i] = s;
        }
    }
    (sv, of)
}

/// Breadth-first level structure of the connected set containing `start`,
/// restricted to vertices with `active[v] == tag`.
fn levels(adj: &[Vec<usize>], start: usize, active: &[usize], tag: usize, seen: &mut [usize], stamp: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![start]];
    seen[start] = stamp;
    loop {
        let mut next = Vec::new();
        for &v in out.last().unwrap() {
            for &w in &adj[v] {
                if active[w] == tag && seen[w] != stamp {
                    seen[w] = stamp;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return out;
        }
        out.push(next);
    }
}

struct Dissection<'a> {
    adj: &'a [Vec<usize>],
    weight: &'a [usize],
    active: Vec<usize>,
    seen: Vec<usize>,
    stamp: usize,
    next_tag: usize,
    order: Vec<usize>,
}

const LEAF_SIZE: usize = 32;

impl Dissection<'_> {
    fn fresh(&mut self) -> usize {
        self.stamp += 1;
        self.stamp
    }

    /// Orders `set` (all tagged `tag`), appending to `self.order`.
    fn run(&mut self, set: Vec<usize>, tag: usize) {
        if set.len() <= LEAF_SIZE {
            self.order.extend(set);
            return;
        }
        // split into connected components
        let stamp = self.fresh();
        let mut comps = Vec::new();
        for &v in &set {
            if self.seen[v] != stamp {
                let lv = levels(self.adj, v, &self.active, tag, &mut self.seen, stamp);
                comps.push(lv.concat());
            }
        }
        if comps.len() > 1 {
            for c in comps {
                let t = self.retag(&c);
                self.run(c, t);
            }
            return;
        }
        // pseudo-peripheral start
        let mut lv = self.bfs(set[0], tag);
        for _ in 0..4 {
            let last = lv.last().unwrap();
            let cand = *last.iter().min_by_key(|&&v| self.adj[v].len()).unwrap();
            let lc = self.bfs(cand, tag);
            if lc.len() <= lv.len() {
                break;
            }
            lv = lc;
        }
        if lv.len() < 3 {
            self.order.extend(set);
            return;
        }
        let total: usize = set.iter().map(|&v| self.weight[v]).sum();
        let mut acc = 0;
        let mut mid = 1;
        for (l, level) in lv.iter().enumerate() {
            acc += level.iter().map(|&v| self.weight[v]).sum::<usize>();
            if 2 * acc >= total {
                mid = l.clamp(1, lv.len() - 2);
                break;
            }
        }
        let mut a: Vec<usize> = lv[..mid].concat();
        let b: Vec<usize> = lv[mid + 1..].concat();
        let ta = self.retag(&a);
        let tb = self.retag(&b);
        // separator vertices without a neighbour in b move to a
        let mut sep = Vec::new();
        for &v in &lv[mid] {
            if self.adj[v].iter().any(|&w| self.active[w] == tb) {
                sep.push(v);
            } else {
                a.push(v);
                self.active[v] = ta;
            }
        }
        self.run(a, ta);
        self.run(b, tb);
        self.order.extend(sep);
    }

    fn bfs(&mut self, start: usize, tag: usize) -> Vec<Vec<usize>> {
        let stamp = self.fresh();
        levels(self.adj, start, &self.active, tag, &mut self.seen, stamp)
    }

    fn retag(&mut self, set: &[usize]) -> usize {
        self.next_tag += 1;
        for &v in set {
            self.active[v] = self.next_tag;
        }
        self.next_tag
    }
}

/// Fill-reducing permutation: `perm[k]` is the original index placed at
/// position `k`. Rows with identical pattern are kept together.
pub fn nested_dissection(a: &CsrMatrix) -> Vec<usize> {
    let (sv, of) = supervariables(a);
    let ns = sv.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); ns];
    for (s, g) in sv.iter().enumerate() {
        let mut nb: Vec<usize> = a.row(g[0]).0.iter().map(|&j| of[j]).filter(|&t| t != s).collect();
        nb.sort_unstable();
        nb.dedup();
        adj[s] = nb;
    }
    let weight: Vec<usize> = sv.iter().map(Vec::len).collect();
    let mut d = Dissection {
        adj: &adj,
        weight: &weight,
        active: vec![0; ns],
        seen: vec![0; ns],
        stamp: 0,
        next_tag: 0,
        order: Vec::with_capacity(ns),
    };
    d.run((0..ns).collect(), 0);
    d.order.iter().flat_map(|&s| sv[s].iter().copied()).collect()
}

pub fn identity_ordering(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Entries `pinv[j] < k` of row `perm[k]`, in permuted numbering.
fn upper_column<'a>(a: &'a CsrMatrix, perm: &[usize], pinv: &'a [usize], k: usize) -> impl Iterator<Item = (usize, f64)> + 'a {
    let (c, v) = a.row(perm[k]);
    c.iter().zip(v).map(move |(&j, &x)| (pinv[j], x))
}

/// Elimination tree of `P A Pᵀ`; `usize::MAX` marks a root.
pub fn elimination_tree(a: &CsrMatrix, perm: &[usize], pinv: &[usize]) -> Vec<usize> {
    let n = a.n;
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for (mut i, _) in upper_column(a, perm, pinv, k) {
            while i != usize::MAX && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == usize::MAX {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Pattern of row `k` of `L` (excluding the diagonal) into `stack[top..]`,
/// in topological order; returns `top`.
fn ereach(a: &CsrMatrix, perm: &[usize], pinv: &[usize], k: usize, parent: &[usize], stack: &mut [usize], mark: &mut [usize]) -> usize {
    let n = a.n;
    let mut top = n;
    mark[k] = k;
    for (mut i, _) in upper_column(a, perm, pinv, k) {
        if i > k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

/// `P A Pᵀ = L Lᵀ`, `L` stored by columns with the diagonal first.
#[derive(Debug, Clone)]
pub struct Cholesky {
    pub perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.n;
        if perm.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: perm.len() });
        }
        let mut pinv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        let parent = elimination_tree(a, &perm, &pinv);
        let mut stack = vec![0; n];
        let mut mark = vec![usize::MAX; n];
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(a, &perm, &pinv, k, &parent, &mut stack, &mut mark);
            for &i in &stack[top..] {
                counts[i] += 1;
            }
        }
        let mut lp = vec![0; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + counts[k];
        }
        let mut li = vec![0; lp[n]];
        let mut lx = vec![0.0; lp[n]];
        let mut next = lp[..n].to_vec();
        let mut x = vec![0.0; n];
        mark.fill(usize::MAX);
        for k in 0..n {
            let top = ereach(a, &perm, &pinv, k, &parent, &mut stack, &mut mark);
            x[k] = 0.0;
            for (i, v) in upper_column(a, &perm, &pinv, k) {
                if i <= k {
                    x[i] = v;
                }
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / lx[lp[i]];
                x[i] = 0.0;
                for p in lp[i] + 1..next[i] {
                    x[li[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                li[next[i]] = k;
                lx[next[i]] = lki;
                next[i] += 1;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: perm[k] });
            }
            li[next[k]] = k;
            lx[next[k]] = d.sqrt();
            next[k] += 1;
        }
        Ok(Self { perm, lp, li, lx })
    }

    pub fn factor_nnz(&self) -> usize {
        self.lx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            y[j] /= self.lx[self.lp[j]];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                y[self.li[p]] -= self.lx[p] * y[j];
            }
        }
        for j in (0..n).rev() {
            for p in self.lp[j] + 1..self.lp[j + 1] {
                y[j] -= self.lx[p] * y[self.li[p]];
            }
            y[j] /= self.lx[self.lp[j]];
        }
        let mut x = vec![0.0; n];
        for (k, v) in y.into_iter().enumerate() {
            x[self.perm[k]] = v;
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<(Vec<f64>, CgOutcome)> {
    let n = a.n;
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((x, CgOutcome { iterations: 0, relative_residual: 0.0 }));
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite { pivot: it });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        if res <= rel_tol {
            return Ok((x, CgOutcome { iterations: it, relative_residual: res }));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    a.mul_vec(&x, &mut ap);
    let res = ap.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt() / bnorm;
    Err(Error::CgNotConverged {
        iterations: max_iter,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// 2D five-point Laplacian on an `m×m` grid, `b×b` blocks per node.
    fn grid(m: usize, b: usize) -> CsrMatrix {
        let idx = |i: usize, j: usize| i * m + j;
        let (mut r, mut c, mut v) = (Vec::new(), Vec::new(), Vec::new());
        let mut push = |p: usize, q: usize, x: f64| {
            for s in 0..b {
                for t in 0..b {
                    r.push(p * b + s);
                    c.push(q * b + t);
                    v.push(if s == t { x } else { 0.1 * x });
                }
            }
        };
        for i in 0..m {
            for j in 0..m {
                push(idx(i, j), idx(i, j), 4.5);
                if i + 1 < m {
                    push(idx(i, j), idx(i + 1, j), -1.0);
                    push(idx(i + 1, j), idx(i, j), -1.0);
                }
                if j + 1 < m {
                    push(idx(i, j), idx(i, j + 1), -1.0);
                    push(idx(i, j + 1), idx(i, j), -1.0);
                }
            }
        }
        CsrMatrix::from_triplets(m * m * b, &r, &c, &v).unwrap()
    }

    #[test]
    fn triplets_merge_in_order() {
        let a = CsrMatrix::from_triplets(2, &[1, 0, 1, 0], &[1, 1, 1, 1], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(a.row_ptr, vec![0, 1, 2]);
        assert_eq!(a.get(0, 1), 6.0);
        assert_eq!(a.get(1, 1), 4.0);
        assert_eq!(a.get(1, 0), 0.0);
        assert!(CsrMatrix::from_triplets(2, &[2], &[0], &[1.0]).is_err());
    }

    #[test]
    fn dissection_is_a_permutation_keeping_blocks() {
        let a = grid(20, 3);
        let p = nested_dissection(&a);
        let mut s = p.clone();
        s.sort_unstable();
        assert_eq!(s, identity_ordering(a.n));
        for blk in p.chunks(3) {
            assert_eq!(blk[0] / 3, blk[2] / 3);
        }
    }

    #[test]
    fn dissection_reduces_fill() {
        let a = grid(40, 1);
        let nd = Cholesky::factor(&a, nested_dissection(&a)).unwrap();
        let nat = Cholesky::factor(&a, identity_ordering(a.n)).unwrap();
        assert!(nd.factor_nnz() < nat.factor_nnz(), "{} vs {}", nd.factor_nnz(), nat.factor_nnz());
    }

    #[test]
    fn cholesky_matches_dense_solve() {
        let a = grid(12, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b: Vec<f64> = (0..a.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let want = a.to_dense().cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b.clone()));
        for perm in [nested_dissection(&a), identity_ordering(a.n)] {
            let x = Cholesky::factor(&a, perm).unwrap().solve(&b);
            let err = x.iter().zip(want.iter()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "{err:e}");
        }
    }

    #[test]
    fn compensated_residual_is_exact_on_cancellation() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(1, 3, &[1.0, 1e16, -1e16]));
        let a = CsrMatrix { n: 1, ..a };
        assert_eq!(a.residual_compensated(&[1.0, 1.0, 1.0], &[0.0]), vec![-1.0]);
    }

    #[test]
    fn indefinite_is_reported() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let a = CsrMatrix::from_dense(&d);
        assert!(matches!(Cholesky::factor(&a, vec![0, 1]), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn cg_agrees_with_cholesky() {
        let a = grid(15, 2);
        let b: Vec<f64> = (0..a.n).map(|i| (i as f64 * 0.37).sin()).collect();
        let direct = Cholesky::factor(&a, nested_dissection(&a)).unwrap().solve(&b);
        let (x, out) = conjugate_gradient(&a, &b, 1e-13, 1000).unwrap();
        assert!(out.relative_residual <= 1e-13);
        let err = x.iter().zip(&direct).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
        assert!(matches!(conjugate_gradient(&a, &b, 1e-13, 2), Err(Error::CgNotConverged { .. })));
    }

    proptest! {
        #[test]
        fn random_spd_systems(seed in 0u64..200, n in 1usize..25) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..i {
                    if rng.gen_bool(0.25) {
                        let v = rng.gen_range(-1.0..1.0);
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
            }
            for i in 0..n {
                let s: f64 = (0..n).map(|j| m[(i, j)].abs()).sum();
                m[(i, i)] = s + 1.0;
            }
            let a = CsrMatrix::from_dense(&m);
            let b: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
            let x = Cholesky::factor(&a, nested_dissection(&a)).unwrap().solve(&b);
            let mut r = vec![0.0; n];
            a.mul_vec(&x, &mut r);
            for i in 0..n {
                prop_assert!((r[i] - b[i]).abs() < 1e-10);
            }
        }
    }
}
