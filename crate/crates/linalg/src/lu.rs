use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::LinalgError;

/// Condition-number ceiling for [`solve_linear`].
pub const MAX_CONDITION: f64 = 1e12;

/// LU factorization with partial pivoting, `P A = L U`, stored packed.
#[derive(Clone, Debug)]
pub struct LuFactor<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    norm1: f64,
}

impl<T: Scalar> LuFactor<T> {
    /// Factors `a`; fails only on an exactly zero or non-finite pivot.
    pub fn new(a: &Matrix<T>) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let norm1 = (0..n)
            .map(|j| (0..n).map(|i| a[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > 0.0) || !pmax.is_finite() {
                return Err(LinalgError::Singular { pivot: k });
            }
            if p != k {
                perm.swap(p, k);
                let data = lu.as_mut_slice();
                for j in 0..n {
                    data.swap(p * n + j, k * n + j);
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == T::zero() {
                    continue;
                }
                let data = lu.as_mut_slice();
                let (top, bottom) = data.split_at_mut(i * n);
                let rk = &top[k * n..k * n + n];
                let ri = &mut bottom[..n];
                for j in k + 1..n {
                    ri[j] -= f * rk[j];
                }
            }
        }
        Ok(Self { lu, perm, norm1 })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut s = x[i];
            for k in 0..i {
                s -= row[k] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = x[i];
            for k in i + 1..n {
                s -= row[k] * x[k];
            }
            x[i] = s / row[i];
        }
        x
    }

    /// Solves `Aᴴ x = b`.
    pub fn solve_adjoint(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        // Aᴴ = Uᴴ Lᴴ P, so solve Uᴴ y = b, Lᴴ z = y, x = Pᵀ z.
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lu[(k, i)].conj() * y[k];
            }
            y[i] = s / self.lu[(i, i)].conj();
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lu[(k, i)].conj() * y[k];
            }
            y[i] = s;
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Hager's estimate of the 1-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 1.0;
        }
        let mut x = vec![T::from_real(1.0 / n as f64); n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi: Vec<T> = y.iter().map(|v| v.phase()).collect();
            let z = self.solve_adjoint(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.abs()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * *b).re()).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![T::zero(); n];
            x[j] = T::one();
        }
        if !est.is_finite() {
            return f64::INFINITY;
        }
        est * self.norm1
    }
}

/// Solves a square system with one step of iterative refinement, refusing
/// systems whose condition estimate exceeds [`MAX_CONDITION`].
pub fn solve_linear<T: Scalar>(m: &Matrix<T>, rhs: &[T]) -> Result<Vec<T>, LinalgError> {
    if rhs.len() != m.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: m.rows(),
            found: rhs.len(),
        });
    }
    let lu = LuFactor::new(m)?;
    let cond = lu.condition_estimate();
    if !(cond < MAX_CONDITION) {
        return Err(LinalgError::IllConditioned { estimate: cond });
    }
    let mut x = lu.solve(rhs);
    let r: Vec<T> = m.matvec(&x).iter().zip(rhs).map(|(&a, &b)| b - a).collect();
    let dx = lu.solve(&r);
    for (xi, d) in x.iter_mut().zip(dx) {
        *xi += d;
    }
    Ok(x)
}
