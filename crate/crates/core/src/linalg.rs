//! Small dense and sparse matrix kernels.
//!
//! The blocks handled here are at most a few thousand rows, so a plain
//! row-major dense type with an LU factorization covers every solve the
//! crate needs. The assembled generator is kept in a row-compressed
//! sparse form.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows, "vec_mul dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    /// Matrix times column vector.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| self.row(i).iter().copied().sum()).collect()
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|a| a.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, a| m.max(a.abs()))
    }

    pub fn min_entry(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    /// Copies the sub-block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        let mut b = Self::zeros(rows, cols);
        for i in 0..rows {
            b.row_mut(i)
                .copy_from_slice(&self.row(r0 + i)[c0..c0 + cols]);
        }
        b
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Self) {
        for i in 0..src.rows {
            self.row_mut(r0 + i)[c0..c0 + src.cols].copy_from_slice(src.row(i));
        }
    }

    pub fn lu(&self) -> Result<Lu<T>> {
        Lu::factor(self.clone())
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    fn factor(mut a: DenseMatrix<T>) -> Result<Self> {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.rows;
        let scale = a.max_abs();
        let tiny = scale * T::epsilon() * T::from_count(n.max(1));
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= tiny || pivot == T::zero() {
                return Err(Error::Singular {
                    context: format!("LU pivot {k} of {n}"),
                });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    a.data.swap(p * n + j, k * n + j);
                }
            }
            let inv = T::one() / a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] * inv;
                if f == T::zero() {
                    continue;
                }
                a[(i, k)] = f;
                let (upper, lower) = a.data.split_at_mut(i * n);
                let pivot_row = &upper[k * n + k + 1..k * n + n];
                for (x, &y) in lower[k + 1..n].iter_mut().zip(pivot_row) {
                    *x -= f * y;
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: T = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: T = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    /// Solves `x A = b` for a row vector `x`.
    pub fn solve_left(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        // x P^T L U = b: first y U = b, then z L = y, finally x = z P.
        let mut y = b.to_vec();
        for j in 0..n {
            let s: T = (0..j).map(|i| y[i] * self.lu[(i, j)]).sum();
            y[j] = (y[j] - s) / self.lu[(j, j)];
        }
        for j in (0..n).rev() {
            let s: T = (j + 1..n).map(|i| y[i] * self.lu[(i, j)]).sum();
            y[j] -= s;
        }
        let mut x = vec![T::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    /// Solves `A X = B`.
    pub fn solve_matrix(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(b.rows, self.dim());
        let bt = b.transpose();
        let mut xt = DenseMatrix::zeros(b.cols, b.rows);
        for j in 0..b.cols {
            xt.row_mut(j).copy_from_slice(&self.solve(bt.row(j)));
        }
        xt.transpose()
    }

    /// Solves `X A = B`.
    pub fn solve_matrix_left(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(b.cols, self.dim());
        let mut x = DenseMatrix::zeros(b.rows, b.cols);
        for i in 0..b.rows {
            x.row_mut(i).copy_from_slice(&self.solve_left(b.row(i)));
        }
        x
    }

    pub fn inverse(&self) -> DenseMatrix<T> {
        self.solve_matrix(&DenseMatrix::identity(self.dim()))
    }
}

/// Row-compressed sparse matrix with sorted, duplicate-free columns per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    n_cols: usize,
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Real> SparseMatrix<T> {
    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n_rows];
        for (i, j, v) in triplets {
            assert!(i < n_rows && j < n_cols, "triplet ({i}, {j}) out of bounds");
            rows[i].push((j, v));
        }
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, T)> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                match merged.last_mut() {
                    Some((lj, lv)) if *lj == j => *lv += v,
                    _ => merged.push((j, v)),
                }
            }
            *row = merged;
        }
        Self { n_cols, rows }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(T::zero(), |k| self.rows[i][k].1)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, v)| (i, j, v)))
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n_rows());
        let mut out = vec![T::zero(); self.n_cols];
        for (row, &xi) in self.rows.iter().zip(x) {
            for &(j, v) in row {
                out[j] += xi * v;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.iter().map(|&(_, v)| v).sum()).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.n_rows(), self.n_cols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// Dense copy of the block with rows `r0..r0+rows` and columns `c0..c0+cols`.
    pub fn dense_block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> DenseMatrix<T> {
        let mut b = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            for &(j, v) in &self.rows[r0 + i] {
                if j >= c0 && j < c0 + cols {
                    b[(i, j - c0)] = v;
                }
            }
        }
        b
    }
}

/// Largest absolute entry of a vector.
pub fn norm_max<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |m, a| m.max(a.abs()))
}

/// Spectral radius of an entrywise nonnegative square matrix.
///
/// Uses Collatz-Wielandt bounds on a power iteration started from the
/// all-ones vector, perturbed slightly so that reducible matrices do not
/// stall on a zero component. Returns the upper bound once the two bounds
/// agree to `tol` or after `max_iter` steps.
pub fn spectral_radius_nonneg<T: Real>(a: &DenseMatrix<T>, tol: T, max_iter: usize) -> T {
    assert!(a.is_square());
    let n = a.rows();
    if n == 0 {
        return T::zero();
    }
    let shift = T::lit(1e-300).max(T::min_positive_value());
    let mut x = vec![T::one(); n];
    let mut upper = T::infinity();
    for _ in 0..max_iter {
        let y = a.vec_mul(&x);
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for (&yi, &xi) in y.iter().zip(&x) {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        upper = hi;
        if hi - lo <= tol * hi.max(T::one()) {
            return hi;
        }
        let s = norm_max(&y);
        if s == T::zero() {
            return T::zero();
        }
        x = y.iter().map(|&v| v / s + shift).collect();
    }
    upper
}
