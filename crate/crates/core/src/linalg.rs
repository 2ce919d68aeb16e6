//! Small dense row-major matrices. Designs here have at most a few dozen
//! columns, so normal-equation solves are the right tool.

use std::ops::{Index, IndexMut};

use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape mismatch");
        Self { rows, cols, data }
    }

    /// Builds an `n × p` matrix from `p` column vectors of length `n`.
    pub fn from_columns(columns: &[Vec<T>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "ragged columns");
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
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

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum()).collect()
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `A ← A + s·x·yᵀ`.
    pub fn add_outer(&mut self, s: T, x: &[T], y: &[T]) {
        for i in 0..self.rows {
            let sx = s * x[i];
            for j in 0..self.cols {
                self[(i, j)] += sx * y[j];
            }
        }
    }

    /// `self · m · selfᵀ` for square `m`.
    pub fn sandwich(&self, m: &Self) -> Self {
        self.matmul(m).matmul(&self.transpose())
    }

    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = (self[(i, j)] + self[(j, i)]) * lit(0.5);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Cholesky factor `L` (lower) of a symmetric matrix. Pivots smaller than
    /// `rel_tol` times the original diagonal entry are reported in the error
    /// as the indices of columns that are (numerically) spanned by earlier
    /// ones.
    pub fn cholesky(&self, rel_tol: T) -> Result<Self, Vec<usize>> {
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        let mut bad = Vec::new();
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            let scale = self[(j, j)].abs().max(T::min_positive_value());
            if !(d > rel_tol * scale) {
                bad.push(j);
                continue;
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        if bad.is_empty() {
            Ok(l)
        } else {
            Err(bad)
        }
    }

    /// Inverse of a symmetric positive definite matrix from its Cholesky
    /// factor.
    pub fn spd_inverse_from_cholesky(l: &Self) -> Self {
        let n = l.rows;
        // L⁻¹ by forward substitution, then (L⁻¹)ᵀ L⁻¹.
        let mut linv = Self::zeros(n, n);
        for c in 0..n {
            for i in c..n {
                let mut s = if i == c { T::one() } else { T::zero() };
                for k in c..i {
                    s -= l[(i, k)] * linv[(k, c)];
                }
                linv[(i, c)] = s / l[(i, i)];
            }
        }
        let mut inv = linv.transpose().matmul(&linv);
        inv.symmetrize();
        inv
    }

    /// Solves `L Lᵀ x = b`.
    pub fn cholesky_solve(l: &Self, b: &[T]) -> Vec<T> {
        let n = l.rows;
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[k];
            }
            x[i] = s / l[(i, i)];
        }
        x
    }

    /// General inverse by Gauss–Jordan elimination with partial pivoting.
    /// Returns `None` for a numerically singular matrix.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let norm = self.data.iter().fold(T::zero(), |m, v| m.max(v.abs())).max(T::min_positive_value());
        for col in 0..n {
            let (piv, pval) = (col..n).map(|r| (r, a[(r, col)].abs())).fold((col, -T::one()), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
            if !(pval > norm * T::epsilon() * T::from_usize_lossy(n)) {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            let d = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= d;
                inv[(col, j)] /= d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    let av = a[(col, j)];
                    let iv = inv[(col, j)];
                    a[(r, j)] -= f * av;
                    inv[(r, j)] -= f * iv;
                }
            }
        }
        Some(inv)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_inverse_roundtrip() {
        let a: Matrix<f64> = Matrix::from_row_major(3, 3, vec![4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0]);
        let l = a.cholesky(1e-12).unwrap();
        let inv = Matrix::spd_inverse_from_cholesky(&l);
        let id = a.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let e: f64 = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-12);
            }
        }
        let gj = a.inverse().unwrap();
        for (x, y) in gj.data.iter().zip(&inv.data) {
            let (x, y): (f64, f64) = (*x, *y);
            assert!((x - y).abs() < 1e-12);
        }
        let x: Vec<f64> = Matrix::cholesky_solve(&l, &[1.0, 2.0, 3.0]);
        let back = a.matvec(&x);
        assert!((back[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_flags_collinear_column() {
        // third column = first + second
        let x = Matrix::from_columns(&[vec![1.0, 0.0, 2.0, 1.0], vec![0.0, 1.0, 1.0, 3.0], vec![1.0, 1.0, 3.0, 4.0]]);
        let xtx = x.transpose().matmul(&x);
        assert_eq!(xtx.cholesky(1e-10).unwrap_err(), vec![2]);
        assert!(Matrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 4.0]).inverse().is_none());
    }
}
