use crate::matrix::{HermitianMatrix, Matrix};
use crate::scalar::Scalar;
use crate::LinalgError;

/// Lower-triangular `L` with `L Lᴴ = m` and positive real diagonal.
///
/// A pivot at or below `1e-12·tr(m)/dim` is reported as
/// [`LinalgError::NotPositiveDefinite`].
pub fn cholesky<T: Scalar>(m: &HermitianMatrix<T>) -> Result<Matrix<T>, LinalgError> {
    let n = m.dim();
    let a = m.as_matrix();
    let floor = 1e-12 * (m.trace_real() / n.max(1) as f64).abs();
    let mut l = Matrix::<T>::zeros(n, n);
    for j in 0..n {
        let mut djj = a[(j, j)].re();
        for k in 0..j {
            djj -= l[(j, k)].abs_sq();
        }
        if !(djj > floor) {
            return Err(LinalgError::NotPositiveDefinite {
                pivot: j,
                value: djj,
            });
        }
        let ljj = djj.sqrt();
        l[(j, j)] = T::from_real(ljj);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            let (ri, rj) = (l.row(i), l.row(j));
            for k in 0..j {
                s -= ri[k] * rj[k].conj();
            }
            l[(i, j)] = s.scale(1.0 / ljj);
        }
    }
    Ok(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower<T: Scalar>(l: &Matrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        let row = l.row(i);
        let mut s = x[i];
        for k in 0..i {
            s -= row[k] * x[k];
        }
        x[i] = s / row[i];
    }
    x
}

/// Solves `Lᴴ x = b` for lower-triangular `L`.
pub fn solve_lower_adjoint<T: Scalar>(l: &Matrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[(k, i)].conj() * x[k];
        }
        x[i] = s / l[(i, i)].conj();
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ComplexMatrix;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_factor_is_identity() {
        let l = cholesky(&HermitianMatrix::<Complex64>::identity(3)).unwrap();
        assert_eq!(l, ComplexMatrix::identity(3));
    }

    #[test]
    fn diagonal_factor() {
        let l = cholesky(&HermitianMatrix::<f64>::from_real_diag(&[4.0, 9.0])).unwrap();
        assert_eq!(l, Matrix::from_diag(&[2.0, 3.0]));
    }

    #[test]
    fn gram_plus_identity_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = ComplexMatrix::from_fn(6, 6, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let m = HermitianMatrix::symmetrize(a.adjoint().matmul(&a).add(&ComplexMatrix::identity(6)));
        let l = cholesky(&m).unwrap();
        let err = l.matmul(&l.adjoint()).sub(m.as_matrix()).frobenius_norm()
            / m.as_matrix().frobenius_norm();
        assert!(err < 1e-10);
        let b: Vec<Complex64> = (0..6).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let x = solve_lower_adjoint(&l, &solve_lower(&l, &b));
        let r = m.as_matrix().matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).norm() < 1e-10);
        }
    }

    #[test]
    fn indefinite_reports_pivot() {
        let m = HermitianMatrix::<f64>::from_real_diag(&[1.0, -2.0, 3.0]);
        match cholesky(&m) {
            Err(LinalgError::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
