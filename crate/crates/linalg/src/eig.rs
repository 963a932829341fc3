//! Hermitian eigensolver: Householder tridiagonalization followed by implicit
//! QL with Wilkinson-style shifts.

use crate::matrix::{HermitianMatrix, Matrix};
use crate::scalar::Scalar;
use crate::LinalgError;

/// Sweeps allowed per eigenvalue before giving up.
const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

/// Eigenvalues (descending) and matching orthonormal eigenvectors (columns).
#[derive(Clone, Debug)]
pub struct Eigen<T> {
    pub values: Vec<f64>,
    pub vectors: Matrix<T>,
}

impl<T: Scalar> Eigen<T> {
    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Vec<T> {
        self.vectors.column(k)
    }

    /// `U diag(λ) Uᴴ`
    pub fn reconstruct(&self) -> Matrix<T> {
        let n = self.values.len();
        let scaled = Matrix::from_fn(n, n, |i, j| self.vectors[(i, j)].scale(self.values[j]));
        scaled.matmul(&self.vectors.adjoint())
    }
}

/// Full eigendecomposition `m = U diag(λ) Uᴴ`, eigenvalues sorted descending.
pub fn hermitian_eig<T: Scalar>(m: &HermitianMatrix<T>) -> Result<Eigen<T>, LinalgError> {
    let n = m.dim();
    if n == 0 {
        return Ok(Eigen {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let (q, diag, sub) = tridiagonalize(m.as_matrix());
    let (values, z) = tql2(diag, sub)?;

    // U = Q Z with Z real; z is stored column-major.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut vectors = Matrix::zeros(n, n);
    for (out_col, &src) in order.iter().enumerate() {
        let zc = &z[src * n..(src + 1) * n];
        for i in 0..n {
            let qi = q.row(i);
            let mut acc = T::zero();
            for (k, &zk) in zc.iter().enumerate() {
                if zk != 0.0 {
                    acc += qi[k].scale(zk);
                }
            }
            vectors[(i, out_col)] = acc;
        }
    }
    Ok(Eigen {
        values: order.iter().map(|&k| values[k]).collect(),
        vectors,
    })
}

/// Eigenvalues only, descending.
pub fn hermitian_eigenvalues<T: Scalar>(m: &HermitianMatrix<T>) -> Result<Vec<f64>, LinalgError> {
    Ok(hermitian_eig(m)?.values)
}

/// Reduces `a` to a real symmetric tridiagonal matrix `T` with `a = Q T Qᴴ`.
/// Returns `(Q, diag(T), subdiag(T))`.
fn tridiagonalize<T: Scalar>(a: &Matrix<T>) -> (Matrix<T>, Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut b = a.clone();
    let mut q = Matrix::<T>::identity(n);
    let mut v = vec![T::zero(); n];

    for k in 0..n.saturating_sub(2) {
        let xnorm = (k + 1..n).map(|i| b[(i, k)].abs_sq()).sum::<f64>().sqrt();
        let tail = (k + 2..n).map(|i| b[(i, k)].abs_sq()).sum::<f64>();
        if tail == 0.0 {
            continue;
        }
        let x0 = b[(k + 1, k)];
        let alpha = -x0.phase().scale(xnorm);
        v.iter_mut().for_each(|x| *x = T::zero());
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = b[(i, k)];
        }
        let vn = v.iter().map(|x| x.abs_sq()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x = x.scale(1.0 / vn));

        // B ← H B H with H = I − 2vvᴴ, as a rank-two update.
        let p: Vec<T> = (0..n)
            .map(|i| (k + 1..n).map(|j| b[(i, j)] * v[j]).sum())
            .collect();
        let s: f64 = (k + 1..n).map(|i| (v[i].conj() * p[i]).re()).sum();
        let qv: Vec<T> = (0..n).map(|i| p[i] - v[i].scale(s)).collect();
        for i in 0..n {
            for j in 0..n {
                let upd = v[i] * qv[j].conj() + qv[i] * v[j].conj();
                if upd != T::zero() {
                    b[(i, j)] -= upd.scale(2.0);
                }
            }
        }
        // Q ← Q H
        for i in 0..n {
            let row = q.row_mut(i);
            let dotv: T = (k + 1..n).map(|j| row[j] * v[j]).sum();
            for j in k + 1..n {
                row[j] -= (dotv * v[j].conj()).scale(2.0);
            }
        }
    }

    // Rotate subdiagonal phases away: D = diag(δ), δ₀ = 1, δ_{i+1} = δ_i·phase(b_{i+1,i}).
    let mut diag = Vec::with_capacity(n);
    let mut sub = vec![0.0; n];
    let mut delta = T::one();
    for i in 0..n {
        diag.push(b[(i, i)].re());
        if i > 0 {
            for r in 0..n {
                q[(r, i)] *= delta;
            }
        }
        if i + 1 < n {
            let e = b[(i + 1, i)];
            sub[i] = e.abs();
            delta *= e.phase();
        }
    }
    (q, diag, sub)
}

/// Implicit QL on a real symmetric tridiagonal matrix. `e[i]` couples rows
/// `i` and `i + 1`. Returns eigenvalues (unsorted) and eigenvectors stored
/// column-major.
fn tql2(mut d: Vec<f64>, mut e: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    let n = d.len();
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_SWEEPS_PER_EIGENVALUE {
                    return Err(LinalgError::NoConvergence { iterations: iter });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (left, right) = z.split_at_mut((i + 1) * n);
                    let zi = &mut left[i * n..];
                    let zi1 = &mut right[..n];
                    for k in 0..n {
                        let hk = zi1[k];
                        zi1[k] = s * zi[k] + c * hk;
                        zi[k] = c * zi[k] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok((d, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ComplexMatrix;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> HermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = ComplexMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        HermitianMatrix::symmetrize(a.add(&a.adjoint()))
    }

    fn orthonormality_defect<T: Scalar>(u: &Matrix<T>) -> f64 {
        let g = u.adjoint().matmul(u);
        g.sub(&Matrix::identity(u.cols())).max_abs()
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let e = hermitian_eig(&HermitianMatrix::<Complex64>::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_is_sorted_descending() {
        let e = hermitian_eig(&HermitianMatrix::<Complex64>::from_real_diag(&[-1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, -1.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_5x5_reconstructs() {
        let m = random_hermitian(5, 11);
        let e = hermitian_eig(&m).unwrap();
        let err = e.reconstruct().sub(m.as_matrix()).frobenius_norm() / m.as_matrix().frobenius_norm();
        assert!(err < 1e-9, "reconstruction error {err}");
        assert!(orthonormality_defect(&e.vectors) < 1e-9);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn real_symmetric_path() {
        let m = HermitianMatrix::new(
            Matrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 1.0], vec![0.0, 1.0, 2.0]])
                .unwrap(),
        )
        .unwrap();
        let e = hermitian_eig(&m).unwrap();
        let s2 = std::f64::consts::SQRT_2;
        for (got, want) in e.values.iter().zip([2.0 + s2, 2.0, 2.0 - s2]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_two_outer_sum() {
        let u = [Complex64::new(1.0, 0.5), Complex64::new(0.0, -1.0), Complex64::new(2.0, 0.0)];
        let v = [Complex64::new(0.0, 1.0), Complex64::new(1.0, 1.0), Complex64::new(-0.5, 0.0)];
        let m = HermitianMatrix::outer(&u).add(&HermitianMatrix::outer(&v));
        let e = hermitian_eig(&m).unwrap();
        assert!(e.values[2].abs() < 1e-12);
        assert!((e.values[0] + e.values[1] - m.trace_real()).abs() < 1e-12);
    }

    #[test]
    fn dimension_64_reconstructs() {
        let m = random_hermitian(64, 3);
        let e = hermitian_eig(&m).unwrap();
        let err = e.reconstruct().sub(m.as_matrix()).frobenius_norm() / m.as_matrix().frobenius_norm();
        assert!(err < 1e-9);
        assert!(orthonormality_defect(&e.vectors) < 1e-9);
    }
}
