//! Nesterov-Todd scalings and Jordan-algebra operations for the symmetric
//! cones the solver handles natively (orthant, second-order, PSD).
//!
//! For an interior pair `(s, z)` the scaling `W` satisfies
//! `W z = W⁻ᵀ s = λ`. Scaled directions live in the same space as `λ`.

use relaycast_linalg::{cholesky, hermitian_eigenvalues, svd, HermitianMatrix, RealMatrix};

use crate::cone::{norm, smat, svec};

/// Cone kinds after rotated cones have been rewritten as plain SOCs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Kind {
    Nonneg,
    Soc,
    Psd(usize),
}

#[derive(Clone, Debug)]
pub(crate) enum Scaling {
    /// `W = diag(d)`.
    Nonneg { d: Vec<f64> },
    /// `W = β·W̄` with `W̄ = [w₀ w₁ᵀ; w₁ I + w₁w₁ᵀ/(1+w₀)]`, `wᵀJw = 1`.
    Soc { beta: f64, w: Vec<f64> },
    /// `W z = svec(Rᵀ Z R)`; `λ` is diagonal in this basis.
    Psd {
        n: usize,
        r: RealMatrix,
        rinv: RealMatrix,
        /// `R⁻ᵀ R⁻¹`
        m: RealMatrix,
        lambda: Vec<f64>,
    },
}

impl Scaling {
    /// NT scaling for interior `s`, `z`; `None` if either is numerically on
    /// the boundary.
    pub(crate) fn new(kind: Kind, s: &[f64], z: &[f64]) -> Option<Self> {
        match kind {
            Kind::Nonneg => {
                let mut d = Vec::with_capacity(s.len());
                for (&si, &zi) in s.iter().zip(z) {
                    if !(si > 0.0 && zi > 0.0) {
                        return None;
                    }
                    d.push((si / zi).sqrt());
                }
                Some(Scaling::Nonneg { d })
            }
            Kind::Soc => {
                let sn = jnorm(s)?;
                let zn = jnorm(z)?;
                let sbar: Vec<f64> = s.iter().map(|v| v / sn).collect();
                let zbar: Vec<f64> = z.iter().map(|v| v / zn).collect();
                let sz: f64 = sbar.iter().zip(&zbar).map(|(a, b)| a * b).sum();
                let gamma = ((1.0 + sz) / 2.0).sqrt();
                let mut w: Vec<f64> = sbar
                    .iter()
                    .zip(&zbar)
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let v = if k == 0 { a + b } else { a - b };
                        v / (2.0 * gamma)
                    })
                    .collect();
                // Restore wᵀJw = 1 exactly against rounding.
                let tail = norm(&w[1..]);
                w[0] = (1.0 + tail * tail).sqrt();
                let beta = (sn / zn).sqrt();
                if !beta.is_finite() || w.iter().any(|v| !v.is_finite()) {
                    return None;
                }
                Some(Scaling::Soc { beta, w })
            }
            Kind::Psd(n) => {
                let ls = cholesky(&HermitianMatrix::symmetrize(smat(s, n))).ok()?;
                let lz = cholesky(&HermitianMatrix::symmetrize(smat(z, n))).ok()?;
                let dec = svd(&lz.transpose().matmul(&ls)).ok()?;
                if dec.sigma.iter().any(|&x| !(x > 0.0)) {
                    return None;
                }
                let isq: Vec<f64> = dec.sigma.iter().map(|x| 1.0 / x.sqrt()).collect();
                let lsv = ls.matmul(&dec.v);
                let r = RealMatrix::from_fn(n, n, |i, j| lsv[(i, j)] * isq[j]);
                let utlz = dec.u.transpose().matmul(&lz.transpose());
                let rinv = RealMatrix::from_fn(n, n, |i, j| utlz[(i, j)] * isq[i]);
                let m = rinv.transpose().matmul(&rinv);
                Some(Scaling::Psd {
                    n,
                    r,
                    rinv,
                    m,
                    lambda: dec.sigma,
                })
            }
        }
    }

    /// `W x`
    pub(crate) fn w(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Nonneg { d } => x.iter().zip(d).map(|(a, b)| a * b).collect(),
            Scaling::Soc { beta, w } => soc_apply(w, x, false, *beta),
            Scaling::Psd { n, r, .. } => svec(&congruence_t(r, &smat(x, *n))),
        }
    }

    /// `Wᵀ x`
    pub(crate) fn wt(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Psd { n, r, .. } => svec(&congruence(r, &smat(x, *n))),
            _ => self.w(x),
        }
    }

    /// `W⁻¹ x`
    pub(crate) fn winv(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Nonneg { d } => x.iter().zip(d).map(|(a, b)| a / b).collect(),
            Scaling::Soc { beta, w } => soc_apply(w, x, true, 1.0 / beta),
            Scaling::Psd { n, rinv, .. } => svec(&congruence_t(rinv, &smat(x, *n))),
        }
    }

    /// `W⁻ᵀ x`
    pub(crate) fn wint(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Psd { n, rinv, .. } => svec(&congruence(rinv, &smat(x, *n))),
            _ => self.winv(x),
        }
    }

    /// The scaled point `λ = W z`.
    pub(crate) fn lambda(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Psd { n, lambda, .. } => {
                let mut out = vec![0.0; n * (n + 1) / 2];
                for (i, &l) in lambda.iter().enumerate() {
                    out[crate::cone::svec_index(*n, i, i)] = l;
                }
                out
            }
            _ => self.w(z),
        }
    }

    /// `u` with `λ ∘ u = r`.
    pub(crate) fn lambda_div(&self, lambda: &[f64], r: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Nonneg { .. } => r.iter().zip(lambda).map(|(a, b)| a / b).collect(),
            Scaling::Soc { .. } => {
                let (l0, l1) = (lambda[0], &lambda[1..]);
                let det = l0 * l0 - l1.iter().map(|v| v * v).sum::<f64>();
                let l1r1: f64 = l1.iter().zip(&r[1..]).map(|(a, b)| a * b).sum();
                let u0 = (l0 * r[0] - l1r1) / det;
                let mut out = Vec::with_capacity(r.len());
                out.push(u0);
                out.extend(r[1..].iter().zip(l1).map(|(ri, li)| (ri - u0 * li) / l0));
                out
            }
            Scaling::Psd { n, lambda: lv, .. } => {
                let n = *n;
                let mut out = vec![0.0; r.len()];
                let mut k = 0;
                for j in 0..n {
                    for i in j..n {
                        out[k] = 2.0 * r[k] / (lv[i] + lv[j]);
                        k += 1;
                    }
                }
                out
            }
        }
    }
}

fn jnorm(x: &[f64]) -> Option<f64> {
    let t = norm(&x[1..]);
    let q = (x[0] - t) * (x[0] + t);
    if x[0] > 0.0 && q > 0.0 {
        Some(q.sqrt())
    } else {
        None
    }
}

/// `k·W̄ x` or `k·W̄⁻¹ x`.
fn soc_apply(w: &[f64], x: &[f64], inverse: bool, k: f64) -> Vec<f64> {
    let w1x1: f64 = w[1..].iter().zip(&x[1..]).map(|(a, b)| a * b).sum();
    let sign = if inverse { -1.0 } else { 1.0 };
    let mut out = Vec::with_capacity(x.len());
    out.push(k * (w[0] * x[0] + sign * w1x1));
    let coef = sign * x[0] + w1x1 / (1.0 + w[0]);
    out.extend(x[1..].iter().zip(&w[1..]).map(|(xi, wi)| k * (xi + coef * wi)));
    out
}

/// `R X Rᵀ`
fn congruence(r: &RealMatrix, x: &RealMatrix) -> RealMatrix {
    r.matmul(x).matmul(&r.transpose())
}

/// `Rᵀ X R`
fn congruence_t(r: &RealMatrix, x: &RealMatrix) -> RealMatrix {
    r.transpose().matmul(x).matmul(r)
}

/// Jordan product `x ∘ y`.
pub(crate) fn jordan_product(kind: Kind, x: &[f64], y: &[f64]) -> Vec<f64> {
    match kind {
        Kind::Nonneg => x.iter().zip(y).map(|(a, b)| a * b).collect(),
        Kind::Soc => {
            let mut out = Vec::with_capacity(x.len());
            out.push(x.iter().zip(y).map(|(a, b)| a * b).sum());
            out.extend(
                x[1..]
                    .iter()
                    .zip(&y[1..])
                    .map(|(xi, yi)| x[0] * yi + y[0] * xi),
            );
            out
        }
        Kind::Psd(n) => {
            let xy = smat(x, n).matmul(&smat(y, n));
            let sym = RealMatrix::from_fn(n, n, |i, j| 0.5 * (xy[(i, j)] + xy[(j, i)]));
            svec(&sym)
        }
    }
}

/// Identity element `e`.
pub(crate) fn identity(kind: Kind, dim: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    match kind {
        Kind::Nonneg => e.iter_mut().for_each(|v| *v = 1.0),
        Kind::Soc => e[0] = 1.0,
        Kind::Psd(n) => {
            for i in 0..n {
                e[crate::cone::svec_index(n, i, i)] = 1.0;
            }
        }
    }
    e
}

/// Largest `t` with `x − t·e` on the boundary; positive iff `x` is interior.
pub(crate) fn interior_margin(kind: Kind, x: &[f64]) -> f64 {
    match kind {
        Kind::Nonneg => x.iter().copied().fold(f64::INFINITY, f64::min),
        Kind::Soc => x[0] - norm(&x[1..]),
        Kind::Psd(n) => crate::cone::psd_min_eig(x, n),
    }
}

/// Largest `α` with `x + α d` in the cone, for interior `x`. PSD blocks
/// expect `x` diagonal (the scaled point). Returns infinity when unbounded.
pub(crate) fn max_step(kind: Kind, x: &[f64], d: &[f64]) -> f64 {
    match kind {
        Kind::Nonneg => x
            .iter()
            .zip(d)
            .filter(|(_, &di)| di < 0.0)
            .map(|(&xi, &di)| -xi / di)
            .fold(f64::INFINITY, f64::min),
        Kind::Soc => {
            let Some(xn) = jnorm(x) else { return 0.0 };
            let xb: Vec<f64> = x.iter().map(|v| v / xn).collect();
            let db: Vec<f64> = d.iter().map(|v| v / xn).collect();
            let rho0 = xb[0] * db[0] - xb[1..].iter().zip(&db[1..]).map(|(a, b)| a * b).sum::<f64>();
            let coef = (rho0 + db[0]) / (xb[0] + 1.0);
            let rho1 = db[1..]
                .iter()
                .zip(&xb[1..])
                .map(|(di, xi)| (di - coef * xi).powi(2))
                .sum::<f64>()
                .sqrt();
            let den = rho1 - rho0;
            if den > 0.0 {
                1.0 / den
            } else {
                f64::INFINITY
            }
        }
        Kind::Psd(n) => {
            let dm = smat(d, n);
            let isq: Vec<f64> = (0..n)
                .map(|i| 1.0 / x[crate::cone::svec_index(n, i, i)].sqrt())
                .collect();
            let scaled = RealMatrix::from_fn(n, n, |i, j| dm[(i, j)] * isq[i] * isq[j]);
            match hermitian_eigenvalues(&HermitianMatrix::symmetrize(scaled)) {
                Ok(ev) => {
                    let lmin = *ev.last().unwrap();
                    if lmin < 0.0 {
                        -1.0 / lmin
                    } else {
                        f64::INFINITY
                    }
                }
                Err(_) => 0.0,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
    }

    fn random_soc_point(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        let mut x: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        x[0] = norm(&x[1..]) + rng.random_range(0.1..2.0);
        x
    }

    fn random_psd_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let a = RealMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        svec(&a.matmul(&a.transpose()).add(&RealMatrix::identity(n).scaled(0.2)))
    }

    #[test]
    fn soc_scaling_maps_z_and_s_to_same_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let s = random_soc_point(&mut rng, 5);
            let z = random_soc_point(&mut rng, 5);
            let sc = Scaling::new(Kind::Soc, &s, &z).unwrap();
            let wz = sc.w(&z);
            assert!(close(&wz, &sc.wint(&s), 1e-10));
            assert!(close(&sc.winv(&sc.w(&s)), &s, 1e-10));
            assert!(interior_margin(Kind::Soc, &wz) > 0.0);
        }
    }

    #[test]
    fn psd_scaling_maps_z_and_s_to_diagonal_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n = 4;
            let s = random_psd_point(&mut rng, n);
            let z = random_psd_point(&mut rng, n);
            let sc = Scaling::new(Kind::Psd(n), &s, &z).unwrap();
            let lam = sc.lambda(&z);
            assert!(close(&sc.w(&z), &lam, 1e-9));
            assert!(close(&sc.wint(&s), &lam, 1e-9));
            assert!(close(&sc.wt(&sc.wint(&s)), &s, 1e-9));
            assert!(close(&sc.winv(&sc.w(&z)), &z, 1e-9));
            // Adjoint consistency: ⟨W x, y⟩ = ⟨x, Wᵀ y⟩.
            let x = random_psd_point(&mut rng, n);
            let y = random_psd_point(&mut rng, n);
            let lhs: f64 = sc.w(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(sc.wt(&y)).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn lambda_div_inverts_jordan_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_soc_point(&mut rng, 4);
        let z = random_soc_point(&mut rng, 4);
        let sc = Scaling::new(Kind::Soc, &s, &z).unwrap();
        let lam = sc.lambda(&z);
        let r = vec![0.3, -1.0, 2.0, 0.5];
        let u = sc.lambda_div(&lam, &r);
        assert!(close(&jordan_product(Kind::Soc, &lam, &u), &r, 1e-10));

        let n = 3;
        let s = random_psd_point(&mut rng, n);
        let z = random_psd_point(&mut rng, n);
        let sc = Scaling::new(Kind::Psd(n), &s, &z).unwrap();
        let lam = sc.lambda(&z);
        let r: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let u = sc.lambda_div(&lam, &r);
        assert!(close(&jordan_product(Kind::Psd(n), &lam, &u), &r, 1e-10));
    }

    #[test]
    fn max_step_hits_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let x = random_soc_point(&mut rng, 4);
            let d: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let a = max_step(Kind::Soc, &x, &d);
            if a.is_finite() {
                let p: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + a * di).collect();
                assert!(interior_margin(Kind::Soc, &p).abs() < 1e-9 * (1.0 + norm(&p)));
            }
        }
        let lam = vec![2.0, 0.0, 0.5];
        let d = vec![-1.0, 0.0, 0.0];
        assert!((max_step(Kind::Psd(2), &lam, &d) - 2.0).abs() < 1e-12);
    }
}
