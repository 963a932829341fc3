use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::scalar::Scalar;
use crate::LinalgError;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type ComplexMatrix = Matrix<Complex64>;
pub type RealMatrix = Matrix<f64>;

impl<T: Scalar> Matrix<T> {
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from row-major data; fails when `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(LinalgError::DimensionMismatch {
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// `v vᴴ`
    pub fn outer(v: &[T]) -> Self {
        Self::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[T]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `selfᴴ x`
    pub fn adjoint_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.rows, x.len(), "adjoint_matvec dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a.scale(k)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a.abs_sq()).sum::<f64>().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.abs()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }

    /// Relative Hermitian defect `‖A − Aᴴ‖_max / max(1, ‖A‖_max)`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..=i {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).abs());
            }
        }
        worst / self.max_abs().max(1.0)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Square matrix equal to its own conjugate transpose.
///
/// Construction checks the Hermitian property within `1e-12` relative
/// tolerance and then symmetrizes exactly, so downstream kernels can rely on
/// `A[(i, j)] == conj(A[(j, i)])` bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix<T = Complex64>(Matrix<T>);

impl<T: Scalar> HermitianMatrix<T> {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(m: Matrix<T>) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        if !m.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let defect = m.hermitian_defect();
        if defect > Self::TOLERANCE {
            return Err(LinalgError::NotHermitian { defect });
        }
        Ok(Self::symmetrize(m))
    }

    /// Takes `(A + Aᴴ)/2` without checking.
    pub fn symmetrize(m: Matrix<T>) -> Self {
        assert!(m.is_square());
        let n = m.rows();
        let mut out = m;
        for i in 0..n {
            let d = out[(i, i)].re();
            out[(i, i)] = T::from_real(d);
            for j in 0..i {
                let v = (out[(i, j)] + out[(j, i)].conj()).scale(0.5);
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
        Self(out)
    }

    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self(Matrix::from_diag(
            &diag.iter().map(|&d| T::from_real(d)).collect::<Vec<_>>(),
        ))
    }

    /// `v vᴴ`, rank one by construction.
    pub fn outer(v: &[T]) -> Self {
        Self::symmetrize(Matrix::outer(v))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.0
    }

    /// `vᴴ A v`, real for Hermitian `A`.
    pub fn quad_form(&self, v: &[T]) -> f64 {
        let n = self.dim();
        assert_eq!(v.len(), n);
        let mut acc = 0.0;
        for i in 0..n {
            let row = self.0.row(i);
            let av: T = row.iter().zip(v).map(|(&a, &b)| a * b).sum();
            acc += (v[i].conj() * av).re();
        }
        acc
    }

    /// `tr(A B)` for Hermitian `B`; real.
    pub fn trace_product(&self, other: &Self) -> f64 {
        let n = self.dim();
        assert_eq!(n, other.dim());
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.0[(i, j)] * other.0[(j, i)]).re();
            }
        }
        acc
    }

    pub fn trace_real(&self) -> f64 {
        self.0.trace().re()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.add(&other.0))
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self(self.0.scaled(k))
    }

    /// `U A Uᴴ` for arbitrary `U`.
    pub fn congruence(&self, u: &Matrix<T>) -> Self {
        Self::symmetrize(u.matmul(&self.0).matmul(&u.adjoint()))
    }
}

impl<T> Index<(usize, usize)> for HermitianMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, idx: (usize, usize)) -> &T {
        &self.0[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_rejects_asymmetric() {
        let m = ComplexMatrix::from_rows(&[
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
            vec![Complex64::new(0.0, 1.0), Complex64::new(2.0, 0.0)],
        ])
        .unwrap();
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    #[test]
    fn quad_form_matches_trace_of_outer() {
        let v = vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25)];
        let a = HermitianMatrix::new(
            ComplexMatrix::from_rows(&[
                vec![Complex64::new(2.0, 0.0), Complex64::new(0.3, -0.7)],
                vec![Complex64::new(0.3, 0.7), Complex64::new(1.0, 0.0)],
            ])
            .unwrap(),
        )
        .unwrap();
        let q = a.quad_form(&v);
        let t = a.trace_product(&HermitianMatrix::outer(&v));
        assert!((q - t).abs() < 1e-12);
    }

    #[test]
    fn row_major_length_checked() {
        assert!(RealMatrix::from_row_major(2, 2, vec![1.0; 3]).is_err());
    }
}
