//! Symmetric sparse matrices in compressed-row form.

use std::io::{self, Write};

use faer::Mat;

/// Symmetric sparse matrix storing both triangles in CSR form with sorted
/// column indices per row. Entry `(i, j)` is stored iff `(j, i)` is.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Zero-valued matrix on the pattern `self ∪ neighbours`, where
    /// `neighbors[i]` lists the off-diagonal columns of row `i`. The pattern
    /// must be symmetric.
    pub fn from_pattern(neighbors: &[Vec<usize>]) -> Self {
        let n = neighbors.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for (i, list) in neighbors.iter().enumerate() {
            let mut cols: Vec<usize> = list.iter().copied().chain(std::iter::once(i)).collect();
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend(cols);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds from a dense symmetric matrix, keeping entries where either
    /// `(i, j)` or `(j, i)` is non-zero.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && (rows[i][j] != 0.0 || rows[j][i] != 0.0))
                    .collect()
            })
            .collect();
        let mut m = Self::from_pattern(&neighbors);
        for i in 0..n {
            for p in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.values[p] = rows[i][m.col_idx[p]];
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.col_idx[start..self.row_ptr[i + 1]]
            .binary_search(&j)
            .ok()
            .map(|k| start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Adds `value` at `(i, j)`; panics if the entry is outside the pattern.
    pub(crate) fn add(&mut self, i: usize, j: usize, value: f64) {
        let p = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside the sparsity pattern"));
        self.values[p] += value;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| j == i || v == 0.0))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Gershgorin upper bound on the spectrum, `max_i Σ_j |a_ij|` with the
    /// diagonal counted by its signed value.
    pub fn gershgorin_upper(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .map(|(j, v)| if j == i { v } else { v.abs() })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bit-exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            self.row(i)
                .all(|(j, v)| self.position(j, i).is_some_and(|p| self.values[p] == v))
        })
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Matrix Market `coordinate real symmetric` (lower triangle, 1-based).
    pub fn write_matrix_market<W: Write>(&self, writer: W) -> io::Result<()> {
        let mut w = io::BufWriter::new(writer);
        let lower: Vec<(usize, usize, f64)> = (0..self.n)
            .flat_map(|i| self.row(i).filter(move |&(j, _)| j <= i).map(move |(j, v)| (i, j, v)))
            .collect();
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "{} {} {}", self.n, self.n, lower.len())?;
        for (i, j, v) in lower {
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
        w.flush()
    }
}
