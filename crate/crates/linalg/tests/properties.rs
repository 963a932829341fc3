use proptest::prelude::*;
use relaycast_linalg::{
    cholesky, hermitian_eig, solve_linear, Complex64, ComplexMatrix, HermitianMatrix,
};

fn complex_entry() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn hermitian(max_dim: usize) -> impl Strategy<Value = HermitianMatrix> {
    (1..=max_dim).prop_flat_map(|n| {
        prop::collection::vec(complex_entry(), n * n).prop_map(move |data| {
            let a = ComplexMatrix::from_row_major(n, n, data).unwrap();
            HermitianMatrix::symmetrize(a.add(&a.adjoint()))
        })
    })
}

/// Lower-triangular with positive real diagonal in [0.5, 2].
fn lower_factor(max_dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    (1..=max_dim).prop_flat_map(|n| {
        (
            prop::collection::vec(complex_entry(), n * n),
            prop::collection::vec(0.5f64..2.0, n),
        )
            .prop_map(move |(data, diag)| {
                ComplexMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
                    std::cmp::Ordering::Greater => data[i * n + j],
                    std::cmp::Ordering::Equal => Complex64::new(diag[i], 0.0),
                    std::cmp::Ordering::Less => Complex64::new(0.0, 0.0),
                })
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eig_reconstructs_and_is_orthonormal(m in hermitian(24)) {
        let e = hermitian_eig(&m).unwrap();
        let scale = m.as_matrix().frobenius_norm().max(1e-300);
        let err = e.reconstruct().sub(m.as_matrix()).frobenius_norm() / scale;
        prop_assert!(err <= 1e-9, "reconstruction {err}");
        let n = m.dim();
        let g = e.vectors.adjoint().matmul(&e.vectors);
        prop_assert!(g.sub(&ComplexMatrix::identity(n)).max_abs() <= 1e-9);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn cholesky_recovers_factor(l in lower_factor(12)) {
        let m = HermitianMatrix::symmetrize(l.matmul(&l.adjoint()));
        let got = cholesky(&m).unwrap();
        // Positive real diagonal pins the column phases, so the factor is unique.
        let err = got.sub(&l).max_abs() / l.max_abs();
        prop_assert!(err <= 1e-9, "factor error {err}");
    }

    #[test]
    fn solve_residual_is_small(
        data in prop::collection::vec(complex_entry(), 36),
        rhs in prop::collection::vec(complex_entry(), 6),
    ) {
        let mut a = ComplexMatrix::from_row_major(6, 6, data).unwrap();
        for i in 0..6 {
            a[(i, i)] += Complex64::new(7.0, 0.0);
        }
        let x = solve_linear(&a, &rhs).unwrap();
        let r: f64 = a.matvec(&x).iter().zip(&rhs).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        let b: f64 = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(r <= 1e-9 * b.max(1e-300));
    }
}
