use relaycast_linalg::{hermitian_eigenvalues, HermitianMatrix, RealMatrix};

/// One block of the cone `K`, in slack-vector order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    /// `s_i ≥ 0` for `k` entries.
    Nonneg(usize),
    /// `s_0 ≥ ‖s_{1..}‖` over `k` entries.
    Soc(usize),
    /// `s_0 ≥ 0, s_1 ≥ 0, s_0·s_1 ≥ ‖s_{2..}‖²` over `k ≥ 2` entries.
    RotatedSoc(usize),
    /// Symmetric `n × n` positive semidefinite matrices in [`svec`] form,
    /// `n(n+1)/2` entries.
    Psd(usize),
}

impl Cone {
    /// Number of slack entries.
    pub fn dim(self) -> usize {
        match self {
            Cone::Nonneg(k) | Cone::Soc(k) | Cone::RotatedSoc(k) => k,
            Cone::Psd(n) => n * (n + 1) / 2,
        }
    }

    /// Barrier degree.
    pub fn degree(self) -> usize {
        match self {
            Cone::Nonneg(k) => k,
            Cone::Soc(_) | Cone::RotatedSoc(_) => 1,
            Cone::Psd(n) => n,
        }
    }

    pub(crate) fn is_valid(self) -> bool {
        match self {
            Cone::Nonneg(k) | Cone::Soc(k) => k >= 1,
            Cone::RotatedSoc(k) => k >= 2,
            Cone::Psd(n) => n >= 1,
        }
    }

    /// Membership test with absolute slack `tol`.
    pub fn contains(self, x: &[f64], tol: f64) -> bool {
        assert_eq!(x.len(), self.dim());
        if x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Cone::Nonneg(_) => x.iter().all(|&v| v >= -tol),
            Cone::Soc(_) => x[0] >= norm(&x[1..]) - tol,
            Cone::RotatedSoc(_) => {
                let tail: f64 = x[2..].iter().map(|v| v * v).sum();
                x[0] >= -tol && x[1] >= -tol && x[0] * x[1] >= tail - tol
            }
            Cone::Psd(n) => psd_min_eig(x, n) >= -tol,
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Position of entry `(i, j)`, `i ≥ j`, in the svec of an `n × n` matrix.
///
/// svec stacks the lower triangle column by column and multiplies
/// off-diagonal entries by `√2`, so `svec(A)·svec(B) = tr(AB)`.
#[inline]
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * n - j * j.saturating_sub(1) / 2 + (i - j)
}

pub fn svec(m: &RealMatrix) -> Vec<f64> {
    let n = m.rows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        out.push(m[(j, j)]);
        for i in j + 1..n {
            out.push(m[(i, j)] * std::f64::consts::SQRT_2);
        }
    }
    out
}

pub fn smat(v: &[f64], n: usize) -> RealMatrix {
    debug_assert_eq!(v.len(), n * (n + 1) / 2);
    let mut m = RealMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            let x = v[k] * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// Smallest eigenvalue of `smat(x)`.
pub(crate) fn psd_min_eig(x: &[f64], n: usize) -> f64 {
    let m = HermitianMatrix::symmetrize(smat(x, n));
    match hermitian_eigenvalues(&m) {
        Ok(ev) => *ev.last().unwrap_or(&0.0),
        Err(_) => f64::NEG_INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_layout_round_trips() {
        let n = 4;
        let m = RealMatrix::from_fn(n, n, |i, j| (i.min(j) * 10 + i.max(j)) as f64);
        let v = svec(&m);
        assert_eq!(v.len(), 10);
        for i in 0..n {
            for j in 0..=i {
                let scale = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                assert!((v[svec_index(n, i, j)] - m[(i, j)] * scale).abs() < 1e-12);
            }
        }
        assert!(smat(&v, n).sub(&m).max_abs() < 1e-12);
    }

    #[test]
    fn svec_inner_product_is_trace() {
        let a = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, -1.0]]).unwrap();
        let b = RealMatrix::from_rows(&[vec![0.5, -3.0], vec![-3.0, 4.0]]).unwrap();
        let lhs: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        assert!((lhs - a.matmul(&b).trace()).abs() < 1e-12);
    }

    #[test]
    fn membership() {
        assert!(Cone::Soc(3).contains(&[5.0, 3.0, 4.0], 0.0));
        assert!(!Cone::Soc(3).contains(&[4.9, 3.0, 4.0], 0.0));
        assert!(Cone::RotatedSoc(3).contains(&[2.0, 2.0, 2.0], 0.0));
        assert!(!Cone::RotatedSoc(3).contains(&[-2.0, -2.0, 0.0], 0.0));
        assert!(Cone::Psd(2).contains(&svec(&RealMatrix::identity(2)), 0.0));
        let indefinite = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(!Cone::Psd(2).contains(&svec(&indefinite), 0.0));
    }
}
