//! Sparse matrix assembly and a banded direct solver.
//!
//! Jacobians of the two-point scheme couple only cells that share an edge, so
//! after a reverse Cuthill–McKee renumbering of the cells the matrix is banded
//! and an LU factorization with partial pivoting inside the band is both
//! backward stable and cheap at the mesh sizes this crate targets.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        out
    }
}

/// Reverse Cuthill–McKee ordering of an undirected graph given as adjacency
/// lists. Returns `order` with `order[new] = old`.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree = |v: usize| adjacency[v].len();
    while order.len() < n {
        let start = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree(v), v))
            .unwrap();
        let start = pseudo_peripheral(adjacency, start);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adjacency[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_unstable_by_key(|&w| (degree(w), w));
            next.dedup();
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adjacency: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; adjacency.len()];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let l = level[v].unwrap();
        for &w in &adjacency[v] {
            if level[w].is_none() {
                level[w] = Some(l + 1);
                queue.push_back(w);
            }
        }
    }
    level
}

fn pseudo_peripheral(adjacency: &[Vec<usize>], mut start: usize) -> usize {
    let mut ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(adjacency, start);
        let far = levels
            .iter()
            .enumerate()
            .filter_map(|(v, l)| l.map(|l| (l, std::cmp::Reverse(adjacency[v].len()), v)))
            .max()
            .unwrap();
        if far.0 <= ecc {
            break;
        }
        ecc = far.0;
        start = far.2;
    }
    start
}

/// LU factorization with row partial pivoting of a banded matrix.
///
/// Row `r` stores columns `r - kl ..= r + ku + kl`; the extra `kl` upper
/// diagonals absorb fill from row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    multipliers: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factor `matrix` after the symmetric permutation `perm` (`perm[old] = new`).
    pub fn factor(matrix: &CsrMatrix, perm: &[usize]) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || perm.len() != n {
            return Err(Error::LinearSolve("matrix must be square and match the permutation".into()));
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for r in 0..n {
            for (c, _) in matrix.row(r) {
                let (pr, pc) = (perm[r], perm[c]);
                if pr > pc {
                    kl = kl.max(pr - pc);
                } else {
                    ku = ku.max(pc - pr);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            band: vec![0.0; n * width],
            multipliers: vec![0.0; n * kl.max(1)],
            pivots: vec![0; n],
        };
        for r in 0..n {
            for (c, v) in matrix.row(r) {
                let (pr, pc) = (perm[r], perm[c]);
                *lu.at_mut(pr, pc) += v;
            }
        }
        lu.eliminate()?;
        Ok(lu)
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.band[self.idx(r, c)]
    }

    #[inline]
    fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        let i = self.idx(r, c);
        &mut self.band[i]
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl) = (self.n, self.kl);
        let scale = self.band.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + self.ku).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for r in k + 1..=last_row {
                let v = self.at(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > scale * 1e-300) || !best.is_finite() {
                return Err(Error::LinearSolve(format!("singular pivot in column {k}")));
            }
            self.pivots[k] = p;
            if p != k {
                for c in k..=last_col {
                    let (i, j) = (self.idx(k, c), self.idx(p, c));
                    self.band.swap(i, j);
                }
            }
            let pivot = self.at(k, k);
            for r in k + 1..=last_row {
                let l = self.at(r, k) / pivot;
                self.multipliers[k * kl + (r - k - 1)] = l;
                *self.at_mut(r, k) = 0.0;
                if l != 0.0 {
                    let (rk, rr) = (self.idx(k, k), self.idx(r, k));
                    // Row offsets differ by (r - k); walk the two rows in lockstep.
                    for c in k + 1..=last_col {
                        let a = self.band[rk + (c - k)];
                        self.band[rr + (c - k)] -= l * a;
                    }
                }
            }
        }
        Ok(())
    }

    /// Solve `A x = b` where `b` and the result use the original numbering.
    pub fn solve(&self, rhs: &[f64], perm: &[usize]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for (old, &new) in perm.iter().enumerate() {
            x[new] = rhs[old];
        }
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..=(k + self.kl).min(n - 1) {
                    x[r] -= self.multipliers[k * self.kl + (r - k - 1)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let mut s = x[k];
            for c in k + 1..=last_col {
                s -= self.at(k, c) * x[c];
            }
            x[k] = s / self.at(k, k);
        }
        let mut out = vec![0.0; n];
        for (old, &new) in perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}
