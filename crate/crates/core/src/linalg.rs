//! Sparse LU for nonsingular M-matrices.
//!
//! For a Z-matrix (nonpositive off-diagonal) Gaussian elimination without
//! pivoting succeeds with all pivots positive exactly when the matrix is a
//! nonsingular M-matrix, and it is then backward stable. Both facts hold for
//! any symmetric permutation, so the factorization reorders states by
//! increasing degree (hubs last) to limit fill-in. Triangular solves with a
//! nonnegative right-hand side never cancel, so positivity survives.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Sparse rows `(column, value)` over positions `0..n`.
pub type SparseRows = Vec<Vec<(usize, f64)>>;

#[derive(Debug, Clone)]
pub struct MMatrixLu {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    inv: Vec<usize>,
    /// Strictly lower part of unit-lower `L`, by permuted row.
    lower: SparseRows,
    /// Strictly upper part of `U`, by permuted row.
    upper: SparseRows,
    pivots: Vec<f64>,
}

fn degree_order(offdiag: &SparseRows) -> Vec<usize> {
    let n = offdiag.len();
    let mut degree = vec![0usize; n];
    for (i, row) in offdiag.iter().enumerate() {
        degree[i] += row.len();
        for &(j, _) in row {
            degree[j] += 1;
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by_key(|&i| (degree[i], i));
    perm
}

impl MMatrixLu {
    /// Factors `A = diag(diag) + offdiag`. Fails with [`Error::NotMMatrix`]
    /// on the first pivot that is not strictly positive.
    pub fn factor(diag: &[f64], offdiag: &SparseRows) -> Result<Self> {
        let n = diag.len();
        let perm = degree_order(offdiag);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut lower: SparseRows = Vec::with_capacity(n);
        let mut upper: SparseRows = Vec::with_capacity(n);
        let mut pivots: Vec<f64> = Vec::with_capacity(n);

        let mut work = vec![0.0; n];
        let mut mark = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut pending: BTreeSet<usize> = BTreeSet::new();

        for row in 0..n {
            let old = perm[row];
            let mut put = |c: usize, v: f64, work: &mut [f64], touched: &mut Vec<usize>, pending: &mut BTreeSet<usize>| {
                if !mark[c] {
                    mark[c] = true;
                    touched.push(c);
                    if c < row {
                        pending.insert(c);
                    }
                }
                work[c] += v;
            };
            put(row, diag[old], &mut work, &mut touched, &mut pending);
            for &(j, v) in &offdiag[old] {
                put(inv[j], v, &mut work, &mut touched, &mut pending);
            }
            let mut l_row = Vec::new();
            while let Some(k) = pending.pop_first() {
                let factor = work[k] / pivots[k];
                if factor != 0.0 {
                    for &(j, u) in &upper[k] {
                        put(j, -factor * u, &mut work, &mut touched, &mut pending);
                    }
                    l_row.push((k, factor));
                }
            }
            let pivot = work[row];
            if !(pivot > 0.0) {
                return Err(Error::NotMMatrix { row: old, pivot });
            }
            let mut u_row: Vec<(usize, f64)> = touched
                .iter()
                .copied()
                .filter(|&c| c > row && work[c] != 0.0)
                .map(|c| (c, work[c]))
                .collect();
            u_row.sort_by_key(|e| e.0);
            for &c in &touched {
                work[c] = 0.0;
                mark[c] = false;
            }
            touched.clear();
            lower.push(l_row);
            upper.push(u_row);
            pivots.push(pivot);
        }
        Ok(MMatrixLu { n, perm, inv, lower, upper, pivots })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Smallest pivot; small values signal near-singularity.
    pub fn min_pivot(&self) -> f64 {
        self.pivots.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..self.n {
            let s: f64 = self.lower[i].iter().map(|&(k, l)| l * y[k]).sum();
            y[i] -= s;
        }
        for i in (0..self.n).rev() {
            let s: f64 = self.upper[i].iter().map(|&(j, u)| u * y[j]).sum();
            y[i] = (y[i] - s) / self.pivots[i];
        }
        (0..self.n).map(|old| y[self.inv[old]]).collect()
    }

    /// Solves `x A = b`, i.e. `A^T x^T = b^T`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // U^T z = r, forward.
        for i in 0..self.n {
            r[i] /= self.pivots[i];
            let zi = r[i];
            for &(j, u) in &self.upper[i] {
                r[j] -= u * zi;
            }
        }
        // L^T x = z, backward.
        for i in (0..self.n).rev() {
            let xi = r[i];
            for &(k, l) in &self.lower[i] {
                r[k] -= l * xi;
            }
        }
        (0..self.n).map(|old| r[self.inv[old]]).collect()
    }
}

/// `I - K` restricted to the positions where `keep` is true, in compressed
/// coordinates. Returns `(diag, offdiag, positions)`.
pub fn identity_minus_restricted(kernel: &SparseRows, keep: &[bool]) -> (Vec<f64>, SparseRows, Vec<usize>) {
    let positions: Vec<usize> = (0..kernel.len()).filter(|&i| keep[i]).collect();
    let mut compressed = vec![usize::MAX; kernel.len()];
    for (c, &i) in positions.iter().enumerate() {
        compressed[i] = c;
    }
    let mut diag = vec![1.0; positions.len()];
    let mut off: SparseRows = Vec::with_capacity(positions.len());
    for (c, &i) in positions.iter().enumerate() {
        let mut row = Vec::new();
        for &(j, v) in &kernel[i] {
            if !keep[j] {
                continue;
            }
            if j == i {
                diag[c] -= v;
            } else {
                row.push((compressed[j], -v));
            }
        }
        off.push(row);
    }
    (diag, off, positions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(diag: &[f64], off: &SparseRows) -> Vec<Vec<f64>> {
        let n = diag.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = diag[i];
            for &(j, v) in &off[i] {
                a[i][j] += v;
            }
        }
        a
    }

    fn mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    fn mul_t(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        (0..a.len()).map(|j| (0..a.len()).map(|i| x[i] * a[i][j]).sum()).collect()
    }

    #[test]
    fn solves_hub_matrix() {
        // Diagonally dominant Z-matrix with a hub column, as in the feedback chain.
        let n = 30;
        let diag = vec![3.0; n];
        let mut off: SparseRows = vec![Vec::new(); n];
        for (i, row) in off.iter_mut().enumerate() {
            if i + 1 < n {
                row.push((i + 1, -1.0));
            }
            if i > 0 {
                row.push((0, -1.5));
            }
        }
        off[0].push((n - 1, -0.5));
        let lu = MMatrixLu::factor(&diag, &off).unwrap();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let a = dense(&diag, &off);
        let x = lu.solve(&b);
        for (l, r) in mul(&a, &x).iter().zip(&b) {
            assert!((l - r).abs() < 1e-12);
        }
        let xt = lu.solve_transpose(&b);
        for (l, r) in mul_t(&a, &xt).iter().zip(&b) {
            assert!((l - r).abs() < 1e-12);
        }
        assert!(x.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn rejects_singular_and_indefinite() {
        // [[1,-1],[-1,1]] is a singular M-matrix.
        let off = vec![vec![(1, -1.0)], vec![(0, -1.0)]];
        assert!(matches!(MMatrixLu::factor(&[1.0, 1.0], &off), Err(Error::NotMMatrix { .. })));
        assert!(matches!(MMatrixLu::factor(&[0.5, 1.0], &off), Err(Error::NotMMatrix { .. })));
        assert!(MMatrixLu::factor(&[1.5, 1.0], &off).is_ok());
    }
}
