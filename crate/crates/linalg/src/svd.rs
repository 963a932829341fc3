use crate::matrix::RealMatrix;
use crate::LinalgError;

const MAX_SWEEPS: usize = 80;

/// Thin real SVD `A = U diag(σ) Vᵀ`, singular values descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: RealMatrix,
    pub sigma: Vec<f64>,
    pub v: RealMatrix,
}

/// One-sided Jacobi SVD of a real matrix with `rows ≥ cols`.
pub fn svd(a: &RealMatrix) -> Result<Svd, LinalgError> {
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: m,
        });
    }
    // Work on columns stored contiguously.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let tol = f64::EPSILON * (m as f64);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (alpha, beta, gamma) = cols[i].iter().zip(&cols[j]).fold(
                    (0.0, 0.0, 0.0),
                    |(a, b, g), (&x, &y)| (a + x * x, b + y * y, g + x * y),
                );
                if gamma.abs() <= tol * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, i, j, c, s);
                rotate(&mut vcols, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            iterations: MAX_SWEEPS,
        });
    }

    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let smax = norms.iter().copied().fold(0.0, f64::max);

    let mut u = RealMatrix::zeros(m, n);
    let mut v = RealMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma.push(s);
        let uk = if s > f64::EPSILON * smax && s > 0.0 {
            cols[src].iter().map(|x| x / s).collect()
        } else {
            complete_basis(&basis, m)
        };
        u.set_column(k, &uk);
        basis.push(uk);
        v.set_column(k, &vcols[src]);
    }
    Ok(Svd { u, sigma, v })
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(j);
    let (ci, cj) = (&mut left[i], &mut right[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// A unit vector orthogonal to `basis`, by Gram-Schmidt on coordinate axes.
fn complete_basis(basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut best = vec![0.0; m];
    let mut best_norm = -1.0;
    for e in 0..m {
        let mut x = vec![0.0; m];
        x[e] = 1.0;
        for b in basis {
            let p: f64 = b.iter().zip(&x).map(|(a, c)| a * c).sum();
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi -= p * bi;
            }
        }
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx > best_norm {
            best_norm = nx;
            best = x.iter().map(|v| v / nx).collect();
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check(a: &RealMatrix) {
        let s = svd(a).unwrap();
        let n = a.cols();
        let us = RealMatrix::from_fn(a.rows(), n, |i, j| s.u[(i, j)] * s.sigma[j]);
        let err = us.matmul(&s.v.transpose()).sub(a).frobenius_norm();
        assert!(err < 1e-10 * a.frobenius_norm().max(1.0), "err {err}");
        let utu = s.u.transpose().matmul(&s.u);
        assert!(utu.sub(&RealMatrix::identity(n)).max_abs() < 1e-10);
        let vtv = s.v.transpose().matmul(&s.v);
        assert!(vtv.sub(&RealMatrix::identity(n)).max_abs() < 1e-10);
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn random_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = RealMatrix::from_fn(7, 7, |_, _| rng.random_range(-1.0..1.0));
        check(&a);
    }

    #[test]
    fn tall_and_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = RealMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let c = RealMatrix::from_fn(2, 4, |_, _| rng.random_range(-1.0..1.0));
        let a = b.matmul(&c);
        check(&a);
        let s = svd(&a).unwrap();
        assert!(s.sigma[2] < 1e-12 * s.sigma[0]);
    }

    #[test]
    fn diagonal_values() {
        let s = svd(&RealMatrix::from_diag(&[1.0, -5.0, 2.0])).unwrap();
        assert_eq!(s.sigma, vec![5.0, 2.0, 1.0]);
    }
}
