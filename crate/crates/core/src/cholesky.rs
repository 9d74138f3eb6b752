//! Left-looking sparse Cholesky factorization `P A Pᵀ = L Lᵀ`.
//!
//! The factor defines the square root `√A = Pᵀ L` (so `A = √A √Aᵀ`); the
//! solve and multiply helpers below all act with that square root.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::SparseSymMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum CholeskyError {
    /// `pivot` is the row of the input matrix (before any reordering).
    #[error("Cholesky breakdown at pivot {pivot} (value {value}): matrix is not positive definite")]
    NotPositiveDefinite { pivot: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    #[default]
    Natural,
    /// Reverse Cuthill–McKee bandwidth reduction.
    #[serde(rename = "rcm")]
    ReverseCuthillMcKee,
}

#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    /// `perm[new] = old`; `None` for the natural order.
    perm: Option<Vec<usize>>,
    col_ptr: Vec<usize>,
    /// Row indices per column, diagonal first, then increasing.
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

const NONE: usize = usize::MAX;

impl SparseCholesky {
    pub fn factorize(a: &SparseSymMatrix, ordering: Ordering) -> Result<Self, CholeskyError> {
        let n = a.n();
        let perm = match ordering {
            Ordering::Natural => None,
            Ordering::ReverseCuthillMcKee => Some(reverse_cuthill_mckee(a)),
        };
        let old_of = |new: usize| perm.as_ref().map_or(new, |p| p[new]);
        let mut new_of = vec![0usize; n];
        for new in 0..n {
            new_of[old_of(new)] = new;
        }

        // Symbolic phase: column patterns through the elimination tree.
        let mut patterns: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for j in 0..n {
            let mut rows: Vec<usize> = a
                .row(old_of(j))
                .map(|(c, _)| new_of[c])
                .filter(|&i| i > j)
                .collect();
            for &child in &children[j] {
                rows.extend(patterns[child].iter().copied().filter(|&i| i > j));
            }
            rows.sort_unstable();
            rows.dedup();
            if let Some(&parent) = rows.first() {
                children[parent].push(j);
            }
            patterns.push(rows);
        }
        drop(children);

        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::with_capacity(patterns.iter().map(|p| p.len() + 1).sum());
        for (j, rows) in patterns.iter().enumerate() {
            row_idx.push(j);
            row_idx.extend_from_slice(rows);
            col_ptr.push(row_idx.len());
        }
        drop(patterns);
        let mut values = vec![0.0; row_idx.len()];

        // Numeric phase. `head[r]` links the columns whose next unused entry
        // sits in row `r`; `next[k]` is the position of that entry in column k.
        let mut work = vec![0.0; n];
        let mut head = vec![NONE; n];
        let mut link = vec![NONE; n];
        let mut next = vec![0usize; n];
        for j in 0..n {
            for (c, v) in a.row(old_of(j)) {
                let i = new_of[c];
                if i >= j {
                    work[i] = v;
                }
            }
            let mut k = head[j];
            while k != NONE {
                let following = link[k];
                let p = next[k];
                let ljk = values[p];
                for q in p..col_ptr[k + 1] {
                    work[row_idx[q]] -= values[q] * ljk;
                }
                next[k] = p + 1;
                if p + 1 < col_ptr[k + 1] {
                    let r = row_idx[p + 1];
                    link[k] = head[r];
                    head[r] = k;
                }
                k = following;
            }
            let start = col_ptr[j];
            let d = work[j];
            if !(d > 0.0) || !d.is_finite() {
                return Err(CholeskyError::NotPositiveDefinite {
                    pivot: old_of(j),
                    value: d,
                });
            }
            let ljj = d.sqrt();
            values[start] = ljj;
            work[j] = 0.0;
            for q in start + 1..col_ptr[j + 1] {
                let r = row_idx[q];
                values[q] = work[r] / ljj;
                work[r] = 0.0;
            }
            if start + 1 < col_ptr[j + 1] {
                next[j] = start + 1;
                let r = row_idx[start + 1];
                link[j] = head[r];
                head[r] = j;
            }
        }

        Ok(Self {
            n,
            perm,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries of `L`, diagonal included.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn permutation(&self) -> Option<&[usize]> {
        self.perm.as_deref()
    }

    pub fn min_diagonal(&self) -> f64 {
        (0..self.n)
            .map(|j| self.values[self.col_ptr[j]])
            .fold(f64::INFINITY, f64::min)
    }

    fn forward(&self, y: &mut [f64]) {
        for j in 0..self.n {
            let start = self.col_ptr[j];
            let yj = y[j] / self.values[start];
            y[j] = yj;
            for q in start + 1..self.col_ptr[j + 1] {
                y[self.row_idx[q]] -= self.values[q] * yj;
            }
        }
    }

    fn backward(&self, y: &mut [f64]) {
        for j in (0..self.n).rev() {
            let start = self.col_ptr[j];
            let mut s = y[j];
            for q in start + 1..self.col_ptr[j + 1] {
                s -= self.values[q] * y[self.row_idx[q]];
            }
            y[j] = s / self.values[start];
        }
    }

    fn lower_mul(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for j in 0..self.n {
            for q in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[q]] += self.values[q] * x[j];
            }
        }
    }

    fn upper_mul(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = (self.col_ptr[j]..self.col_ptr[j + 1])
                .map(|q| self.values[q] * x[self.row_idx[q]])
                .sum();
        }
    }

    /// `(P x)_i = x_{perm[i]}`
    fn permute(&self, x: &[f64], out: &mut [f64]) {
        match &self.perm {
            None => out.copy_from_slice(x),
            Some(p) => out.iter_mut().zip(p).for_each(|(o, &old)| *o = x[old]),
        }
    }

    /// `out = Pᵀ x`
    fn unpermute(&self, x: &[f64], out: &mut [f64]) {
        match &self.perm {
            None => out.copy_from_slice(x),
            Some(p) => p.iter().zip(x).for_each(|(&old, &v)| out[old] = v),
        }
    }

    /// Solves `√A y = x`, i.e. `L y = P x`.
    pub fn solve_root_into(&self, x: &[f64], y: &mut [f64]) {
        self.permute(x, y);
        self.forward(y);
    }

    /// Solves `√Aᵀ y = x`, i.e. `Lᵀ P y = x`. `scratch` has length `n`.
    pub fn solve_root_transpose_into(&self, x: &[f64], y: &mut [f64], scratch: &mut [f64]) {
        scratch.copy_from_slice(x);
        self.backward(scratch);
        self.unpermute(scratch, y);
    }

    /// `y = √A x = Pᵀ L x`.
    pub fn mul_root_into(&self, x: &[f64], y: &mut [f64], scratch: &mut [f64]) {
        self.lower_mul(x, scratch);
        self.unpermute(scratch, y);
    }

    /// `y = √Aᵀ x = Lᵀ P x`.
    pub fn mul_root_transpose_into(&self, x: &[f64], y: &mut [f64], scratch: &mut [f64]) {
        self.permute(x, scratch);
        self.upper_mul(scratch, y);
    }

    /// Solves `A y = x`.
    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        let mut tmp = vec![0.0; self.n];
        let mut scratch = vec![0.0; self.n];
        let mut y = vec![0.0; self.n];
        self.solve_root_into(x, &mut tmp);
        self.solve_root_transpose_into(&tmp, &mut y, &mut scratch);
        y
    }
}

/// Reverse Cuthill–McKee ordering (`perm[new] = old`), one BFS per
/// connected component starting from a minimum-degree vertex.
pub fn reverse_cuthill_mckee(a: &SparseSymMatrix) -> Vec<usize> {
    let n = a.n();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree = |i: usize| neighbors[i].len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree(i), i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let mut queue = VecDeque::from([seed]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = neighbors[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree(w), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_spd(n: usize, seed: u64) -> Vec<Vec<f64>> {
        // deterministic sparse SPD: graph Laplacian of a ring with chords + identity
        let mut rows = vec![vec![0.0; n]; n];
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let add_edge = |i: usize, j: usize, w: f64, rows: &mut Vec<Vec<f64>>| {
            if i == j {
                return;
            }
            rows[i][j] -= w;
            rows[j][i] -= w;
            rows[i][i] += w;
            rows[j][j] += w;
        };
        for i in 0..n {
            add_edge(i, (i + 1) % n, 1.0, &mut rows);
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % n;
            add_edge(i, j, 0.5, &mut rows);
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] += 0.1 + i as f64 * 1e-3;
        }
        rows
    }

    fn dense_mul(rows: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        rows.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    #[test]
    fn root_reconstructs_matrix() {
        for ordering in [Ordering::Natural, Ordering::ReverseCuthillMcKee] {
            let rows = random_spd(25, 3);
            let a = SparseSymMatrix::from_dense(&rows);
            let f = SparseCholesky::factorize(&a, ordering).unwrap();
            let n = 25;
            let mut scratch = vec![0.0; n];
            // columns of √A √Aᵀ
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let mut t = vec![0.0; n];
                f.mul_root_transpose_into(&e, &mut t, &mut scratch);
                let mut col = vec![0.0; n];
                f.mul_root_into(&t, &mut col, &mut scratch);
                for i in 0..n {
                    assert!((col[i] - rows[i][j]).abs() < 1e-12, "{ordering:?} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn solves_are_inverse_of_multiplies() {
        let rows = random_spd(40, 11);
        let a = SparseSymMatrix::from_dense(&rows);
        let f = SparseCholesky::factorize(&a, Ordering::ReverseCuthillMcKee).unwrap();
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut s = vec![0.0; 40];
        let mut y = vec![0.0; 40];
        let mut back = vec![0.0; 40];
        f.solve_root_transpose_into(&x, &mut y, &mut s);
        f.mul_root_transpose_into(&y, &mut back, &mut s);
        for (u, v) in back.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
        f.solve_root_into(&x, &mut y);
        f.mul_root_into(&y, &mut back, &mut s);
        for (u, v) in back.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
        let sol = f.solve(&x);
        for (u, v) in dense_mul(&rows, &sol).iter().zip(&x) {
            assert!((u - v).abs() < 1e-11);
        }
    }

    #[test]
    fn breakdown_reports_pivot() {
        let rows = vec![vec![1.0, 2.0, 0.0], vec![2.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let err = SparseCholesky::factorize(&SparseSymMatrix::from_dense(&rows), Ordering::Natural).unwrap_err();
        assert!(matches!(err, CholeskyError::NotPositiveDefinite { pivot: 1, .. }));
    }

    #[test]
    fn rcm_is_permutation_and_reduces_fill_on_ring() {
        let rows = random_spd(60, 5);
        let a = SparseSymMatrix::from_dense(&rows);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..60).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn solve_matches_dense(seed in 0u64..500, n in 2usize..30) {
            let rows = random_spd(n, seed);
            let a = SparseSymMatrix::from_dense(&rows);
            let f = SparseCholesky::factorize(&a, Ordering::Natural).unwrap();
            let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
            let x = f.solve(&b);
            let r = dense_mul(&rows, &x);
            for (u, v) in r.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-10 * (1.0 + v.abs()));
            }
        }
    }
}
