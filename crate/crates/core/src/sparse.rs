//! Compressed-row sparse matrices, a Jacobi-preconditioned BiCGStab solver
//! and a sparse LU wrapper for the Newton systems.

use std::sync::Arc;

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseRowMatRef, SymbolicSparseRowMatRef};

use crate::error::{Error, Result};

/// Canonical CSR matrix. Structural entries are kept even when their value is
/// zero, so matrices assembled from the same index set share one pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Arc<[usize]>,
    col_indices: Arc<[usize]>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets. Duplicates are summed in a
    /// canonical order (sorted by value), so the result is bit-identical for
    /// any permutation of the input.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(i, j, _) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::IndexOutOfRange { row: i, col: j, rows, cols });
            }
        }
        let mut sorted = triplets.to_vec();
        sorted.sort_unstable_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        });

        let mut row_offsets = vec![0usize; rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(j);
                values.push(v);
                row_offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for r in 0..rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(Self {
            rows,
            cols,
            row_offsets: row_offsets.into(),
            col_indices: col_indices.into(),
            values,
        })
    }

    /// Build from raw CSR arrays, validating the canonical-form invariants.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        row_offsets: Arc<[usize]>,
        col_indices: Arc<[usize]>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 {
            return Err(Error::DimensionMismatch { expected: rows + 1, found: row_offsets.len() });
        }
        if values.len() != col_indices.len() || row_offsets[rows] != values.len() {
            return Err(Error::DimensionMismatch { expected: col_indices.len(), found: values.len() });
        }
        for r in 0..rows {
            let row = &col_indices[row_offsets[r]..row_offsets[r + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&c| c >= cols) {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: row.iter().copied().max().unwrap_or(0),
                    rows,
                    cols,
                });
            }
        }
        Ok(Self { rows, cols, row_offsets, col_indices, values })
    }

    /// Same pattern as `self`, all values zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && (Arc::ptr_eq(&self.row_offsets, &other.row_offsets)
                || self.row_offsets == other.row_offsets)
            && (Arc::ptr_eq(&self.col_indices, &other.col_indices)
                || self.col_indices == other.col_indices)
    }

    /// Stored value at `(i, j)`, zero if not structurally present.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let start = self.row_offsets[i];
        let row = &self.col_indices[start..self.row_offsets[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.values[start + k],
            Err(_) => 0.0,
        }
    }

    /// Position of `(i, j)` in the value array.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_offsets[i];
        let row = &self.col_indices[start..self.row_offsets[i + 1]];
        row.binary_search(&j).ok().map(|k| start + k)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.rows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = A x`, accumulating each row left to right.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: x.len() });
        }
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, found: y.len() });
        }
        for (r, out) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_offsets[r], self.row_offsets[r + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *out = acc;
        }
        Ok(())
    }

    /// `self += alpha * other` for matrices on the same pattern.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        assert!(self.same_pattern(other), "axpy requires a shared sparsity pattern");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn transpose(&self) -> Self {
        let mut trips = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                trips.push((self.col_indices[k], r, self.values[k]));
            }
        }
        Self::from_triplets(self.cols, self.rows, &trips).expect("indices already validated")
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for r in 0..self.rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                d[r][self.col_indices[k]] += self.values[k];
            }
        }
        d
    }

    /// Assemble the 2x2 block matrix `[[a, b], [c, d]]`.
    pub fn block_2x2(a: &Self, b: &Self, c: &Self, d: &Self) -> Result<Self> {
        let (n0, n1) = (a.rows, c.rows);
        let (m0, m1) = (a.cols, b.cols);
        if b.rows != n0 || d.rows != n1 || c.cols != m0 || d.cols != m1 {
            return Err(Error::DimensionMismatch { expected: n0 + n1, found: b.rows + d.rows });
        }
        let nnz = a.nnz() + b.nnz() + c.nnz() + d.nnz();
        let mut row_offsets = Vec::with_capacity(n0 + n1 + 1);
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_offsets.push(0);
        for (left, right) in [(a, b), (c, d)] {
            for r in 0..left.rows {
                for k in left.row_offsets[r]..left.row_offsets[r + 1] {
                    col_indices.push(left.col_indices[k]);
                    values.push(left.values[k]);
                }
                for k in right.row_offsets[r]..right.row_offsets[r + 1] {
                    col_indices.push(right.col_indices[k] + m0);
                    values.push(right.values[k]);
                }
                row_offsets.push(col_indices.len());
            }
        }
        Ok(Self {
            rows: n0 + n1,
            cols: m0 + m1,
            row_offsets: row_offsets.into(),
            col_indices: col_indices.into(),
            values,
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = b` with Jacobi-preconditioned BiCGStab.
///
/// On success `‖A x − b‖₂ ≤ tol · max(1, ‖b‖₂)` holds for the true residual.
/// Breakdowns restart the iteration from the current iterate.
pub fn solve_krylov(a: &CsrMatrix, b: &[f64], tol: f64, maxit: usize, guess: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.cols() });
    }
    if b.len() != n || guess.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len().min(guess.len()) });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let target = tol * norm2(b).max(1.0);

    let mut x = guess.to_vec();
    let mut r = vec![0.0; n];
    let mut residual = true_residual(a, &x, b, &mut r)?;
    let mut iterations = 0;

    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];

    'restart: while residual > target && iterations < maxit {
        let r0 = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        v.iter_mut().for_each(|e| *e = 0.0);
        p.iter_mut().for_each(|e| *e = 0.0);

        while iterations < maxit {
            iterations += 1;
            let rho_new = dot(&r0, &r);
            if rho_new.abs() < 1e-300 || omega == 0.0 {
                residual = true_residual(a, &x, b, &mut r)?;
                continue 'restart;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
                phat[i] = inv_diag[i] * p[i];
            }
            a.spmv_into(&phat, &mut v)?;
            let denom = dot(&r0, &v);
            if denom.abs() < 1e-300 {
                residual = true_residual(a, &x, b, &mut r)?;
                continue 'restart;
            }
            alpha = rho / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm2(&s) <= target {
                for i in 0..n {
                    x[i] += alpha * phat[i];
                }
                residual = true_residual(a, &x, b, &mut r)?;
                if residual <= target {
                    break 'restart;
                }
                continue 'restart;
            }
            for i in 0..n {
                shat[i] = inv_diag[i] * s[i];
            }
            a.spmv_into(&shat, &mut t)?;
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for i in 0..n {
                x[i] += alpha * phat[i] + omega * shat[i];
                r[i] = s[i] - omega * t[i];
            }
            if norm2(&r) <= target {
                residual = true_residual(a, &x, b, &mut r)?;
                if residual <= target {
                    break 'restart;
                }
                continue 'restart;
            }
        }
        residual = true_residual(a, &x, b, &mut r)?;
    }

    if residual <= target {
        Ok(x)
    } else {
        Err(Error::SolverFailure { iterations, residual })
    }
}

fn true_residual(a: &CsrMatrix, x: &[f64], b: &[f64], r: &mut [f64]) -> Result<f64> {
    a.spmv_into(x, r)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(norm2(r))
}

/// Sparse LU factorization with partial pivoting. The symbolic analysis is
/// cached and reused while the sparsity pattern does not change.
#[derive(Default)]
pub struct SparseLu {
    symbolic: Option<(Arc<[usize]>, Arc<[usize]>, SymbolicLu<usize>)>,
    numeric: Option<Lu<usize, f64>>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu")
            .field("analyzed", &self.symbolic.is_some())
            .field("factored", &self.numeric.is_some())
            .finish()
    }
}

impl SparseLu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factor(&mut self, a: &CsrMatrix) -> Result<()> {
        if a.rows() != a.cols() {
            return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
        }
        let sym = SymbolicSparseRowMatRef::new_checked(
            a.rows(),
            a.cols(),
            a.row_offsets(),
            None,
            a.col_indices(),
        );
        let csc = SparseRowMatRef::new(sym, a.values())
            .to_col_major()
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;

        let reuse = matches!(&self.symbolic, Some((ro, ci, _))
            if (Arc::ptr_eq(ro, &a.row_offsets) || **ro == *a.row_offsets)
                && (Arc::ptr_eq(ci, &a.col_indices) || **ci == *a.col_indices));
        if !reuse {
            let symbolic = SymbolicLu::try_new(csc.symbolic())
                .map_err(|e| Error::Factorization(format!("{e:?}")))?;
            self.symbolic = Some((a.row_offsets.clone(), a.col_indices.clone(), symbolic));
        }
        let symbolic = self.symbolic.as_ref().unwrap().2.clone();
        let lu = Lu::try_new_with_symbolic(symbolic, csc.as_ref())
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        self.numeric = Some(lu);
        Ok(())
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<()> {
        let lu = self
            .numeric
            .as_ref()
            .ok_or_else(|| Error::Factorization("solve before factor".into()))?;
        let n = rhs.len();
        lu.solve_in_place_with_conj(
            faer::Conj::No,
            faer::MatMut::from_column_major_slice_mut(rhs, n, 1),
        );
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("singular matrix".into()));
        }
        Ok(())
    }
}
