//! Sparse LDLᵀ factorization for symmetric quasi-definite systems.
//!
//! Up-looking elimination-tree algorithm on a reverse Cuthill-McKee permuted
//! matrix. Quasi-definite matrices admit a factorization for every symmetric
//! permutation, so no pivoting is performed.

use std::collections::VecDeque;

use crate::sparse::{CscMatrix, TripletBuilder};

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroPivot(pub usize);

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    /// perm[new] = old
    perm: Vec<usize>,
    /// inv_perm[old] = new
    inv_perm: Vec<usize>,
    parent: Vec<Option<usize>>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl LdlFactor {
    /// Factors a symmetric matrix given by its upper triangle.
    pub fn new(upper: &CscMatrix) -> Result<Self, ZeroPivot> {
        assert_eq!(upper.nrows, upper.ncols);
        let n = upper.ncols;
        let perm = reverse_cuthill_mckee(upper);
        let mut inv_perm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }
        let permuted = permute_upper(upper, &inv_perm);
        let (parent, lnz) = symbolic(&permuted);
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let nnz = lp[n];
        let mut factor = Self {
            n,
            perm,
            inv_perm,
            parent,
            lp,
            li: vec![0; nnz],
            lx: vec![0.0; nnz],
            d: vec![0.0; n],
        };
        factor.numeric(&permuted)?;
        Ok(factor)
    }

    /// Recomputes the numeric factor for a matrix with the same sparsity pattern.
    pub fn refactor(&mut self, upper: &CscMatrix) -> Result<(), ZeroPivot> {
        let permuted = permute_upper(upper, &self.inv_perm);
        self.numeric(&permuted)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }

    /// Number of negative pivots (the inertia of a quasi-definite KKT matrix
    /// equals the number of constraint rows).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    fn numeric(&mut self, a: &CscMatrix) -> Result<(), ZeroPivot> {
        let n = self.n;
        let mut y = vec![0.0; n];
        let mut flag = vec![usize::MAX; n];
        let mut pattern = vec![0usize; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for (i0, v) in a.col(k) {
                if i0 > k {
                    continue;
                }
                y[i0] += v;
                let mut len = 0;
                let mut i = i0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = self.parent[i].expect("etree walk past root");
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = self.lp[i];
                let end = start + lnz[i];
                for p in start..end {
                    y[self.li[p]] -= self.lx[p] * yi;
                }
                let l_ki = yi / self.d[i];
                dk -= l_ki * yi;
                self.li[end] = k;
                self.lx[end] = l_ki;
                lnz[i] += 1;
            }
            if dk == 0.0 || !dk.is_finite() {
                return Err(ZeroPivot(self.perm[k]));
            }
            self.d[k] = dk;
        }
        Ok(())
    }

    /// Solves `K x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|k| b[self.perm[k]]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.lp[j]..self.lp[j + 1] {
                    x[self.li[p]] -= self.lx[p] * xj;
                }
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..n).rev() {
            let mut acc = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                acc -= self.lx[p] * x[self.li[p]];
            }
            x[j] = acc;
        }
        for k in 0..n {
            b[self.perm[k]] = x[k];
        }
    }
}

fn symbolic(a: &CscMatrix) -> (Vec<Option<usize>>, Vec<usize>) {
    let n = a.ncols;
    let mut parent = vec![None; n];
    let mut flag = vec![usize::MAX; n];
    let mut lnz = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        for (i0, _) in a.col(k) {
            let mut i = i0;
            if i >= k {
                continue;
            }
            while flag[i] != k {
                if parent[i].is_none() {
                    parent[i] = Some(k);
                }
                lnz[i] += 1;
                flag[i] = k;
                i = parent[i].unwrap();
            }
        }
    }
    (parent, lnz)
}

/// Upper triangle of `Pᵀ A P` given the upper triangle of `A`.
fn permute_upper(upper: &CscMatrix, inv_perm: &[usize]) -> CscMatrix {
    let n = upper.ncols;
    let mut t = TripletBuilder::new(n, n);
    for j in 0..n {
        for (i, v) in upper.col(j) {
            let (pi, pj) = (inv_perm[i], inv_perm[j]);
            if pi <= pj {
                t.push(pi, pj, v);
            } else {
                t.push(pj, pi, v);
            }
        }
    }
    // keep explicit diagonal entries even when zero so the pattern is stable
    let mut c = t.to_csc();
    ensure_diagonal(&mut c);
    c
}

fn ensure_diagonal(c: &mut CscMatrix) {
    let n = c.ncols;
    let missing: Vec<usize> = (0..n)
        .filter(|&j| c.col(j).last().map(|(i, _)| i) != Some(j))
        .collect();
    if missing.is_empty() {
        return;
    }
    let mut t = TripletBuilder::new(n, n);
    for j in 0..n {
        for (i, v) in c.col(j) {
            t.push(i, j, v);
        }
    }
    let mut out = t.to_csc();
    // TripletBuilder drops zeros, so patch them in directly
    let mut colptr = vec![0usize; n + 1];
    let mut rowind = Vec::with_capacity(out.nnz() + missing.len());
    let mut values = Vec::with_capacity(out.nnz() + missing.len());
    for j in 0..n {
        let mut has_diag = false;
        for (i, v) in out.col(j) {
            if i == j {
                has_diag = true;
            }
            rowind.push(i);
            values.push(v);
        }
        if !has_diag {
            rowind.push(j);
            values.push(0.0);
        }
        colptr[j + 1] = rowind.len();
    }
    out.colptr = colptr;
    out.rowind = rowind;
    out.values = values;
    *c = out;
}

/// Reverse Cuthill-McKee ordering of the symmetric sparsity graph.
pub fn reverse_cuthill_mckee(upper: &CscMatrix) -> Vec<usize> {
    let n = upper.ncols;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        for (i, _) in upper.col(j) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            nbrs.sort_by_key(|&u| (degree[u], u));
            for u in nbrs {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(start: usize, adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut seen = std::collections::HashSet::from([start]);
    let mut levels = vec![vec![start]];
    loop {
        let mut next = Vec::new();
        for &v in levels.last().unwrap() {
            for &u in &adj[v] {
                if seen.insert(u) {
                    next.push(u);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        levels.push(next);
    }
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut v = seed;
    let mut ecc = bfs_levels(v, adj).len();
    for _ in 0..8 {
        let levels = bfs_levels(v, adj);
        let cand = *levels
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&u| (degree[u], u))
            .unwrap();
        let e = bfs_levels(cand, adj).len();
        if e <= ecc {
            break;
        }
        v = cand;
        ecc = e;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn upper_of(dense: &[Vec<f64>]) -> CscMatrix {
        let n = dense.len();
        let mut t = TripletBuilder::new(n, n);
        for j in 0..n {
            for i in 0..=j {
                t.push(i, j, dense[i][j]);
            }
        }
        t.to_csc()
    }

    #[test]
    fn solves_quasi_definite_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, m) = (12, 7);
        let dim = n + m;
        let mut k = vec![vec![0.0; dim]; dim];
        for i in 0..n {
            k[i][i] = 1.0 + rng.random::<f64>();
            if i + 1 < n {
                let v = 0.3 * rng.random::<f64>();
                k[i][i + 1] = v;
                k[i + 1][i] = v;
            }
        }
        for r in 0..m {
            for c in 0..n {
                if rng.random::<f64>() < 0.3 {
                    let v = rng.random::<f64>() - 0.5;
                    k[n + r][c] = v;
                    k[c][n + r] = v;
                }
            }
            k[n + r][n + r] = -0.1;
        }
        let f = LdlFactor::new(&upper_of(&k)).unwrap();
        assert_eq!(f.negative_pivots(), m);
        let x_true: Vec<f64> = (0..dim).map(|i| (i as f64).sin()).collect();
        let mut b: Vec<f64> = (0..dim)
            .map(|i| (0..dim).map(|j| k[i][j] * x_true[j]).sum())
            .collect();
        f.solve(&mut b);
        for (a, e) in b.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-10, "{a} vs {e}");
        }
    }

    #[test]
    fn missing_diagonal_is_a_zero_pivot() {
        let k = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(LdlFactor::new(&upper_of(&k)).is_err());
    }

    #[test]
    fn rcm_is_a_permutation() {
        let k = vec![
            vec![4.0, 1.0, 0.0, 1.0],
            vec![1.0, 4.0, 1.0, 0.0],
            vec![0.0, 1.0, 4.0, 0.0],
            vec![1.0, 0.0, 0.0, 4.0],
        ];
        let mut p = reverse_cuthill_mckee(&upper_of(&k));
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2, 3]);
    }
}
