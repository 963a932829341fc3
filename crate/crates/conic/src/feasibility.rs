//! Feasibility of affine constraints on complex Hermitian PSD matrices,
//! decided by maximizing a uniform slack margin.

use relaycast_linalg::{hermitian_eigenvalues, Complex64, HermitianMatrix};

use crate::expr::LinExpr;
use crate::program::{HermitianVar, ProgramBuilder};
use crate::solver::{SolveStatus, SolverOptions};
use crate::ConicError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpRelation {
    LessEq,
    Equal,
}

/// `Σ_b tr(X_b C_b) + constant (≤ | =) 0`.
#[derive(Clone, Debug)]
pub struct SdpConstraint {
    pub terms: Vec<(usize, HermitianMatrix<Complex64>)>,
    pub constant: f64,
    pub relation: SdpRelation,
}

impl SdpConstraint {
    pub fn less_eq(terms: Vec<(usize, HermitianMatrix<Complex64>)>, constant: f64) -> Self {
        Self {
            terms,
            constant,
            relation: SdpRelation::LessEq,
        }
    }

    pub fn equal(terms: Vec<(usize, HermitianMatrix<Complex64>)>, constant: f64) -> Self {
        Self {
            terms,
            constant,
            relation: SdpRelation::Equal,
        }
    }

    pub fn eval(&self, xs: &[HermitianMatrix<Complex64>]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(b, c)| c.trace_product(&xs[*b]))
                .sum::<f64>()
    }

    fn scale(&self) -> f64 {
        let rho = self
            .terms
            .iter()
            .map(|(_, c)| c.as_matrix().frobenius_norm())
            .sum::<f64>()
            + self.constant.abs();
        if rho > 0.0 {
            rho
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug)]
pub enum FeasibilityOutcome {
    Feasible(Vec<HermitianMatrix<Complex64>>),
    Infeasible,
    /// The margin could not be separated from zero.
    Indeterminate,
}

impl FeasibilityOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityOutcome::Feasible(_))
    }
}

#[derive(Clone, Debug)]
pub struct FeasibilityReport {
    pub outcome: FeasibilityOutcome,
    /// Best margin estimate; normalized constraint violation is `−margin`.
    pub margin: f64,
    pub solver_status: SolveStatus,
    pub iterations: usize,
}

/// Decides whether PSD matrices `X_b` of orders `dims` satisfy every
/// constraint.
///
/// Solves `max s` subject to `(Σ tr(X C_i) + c_i)/ρ_i + s ≤ 0` for
/// inequalities, the equalities scaled by `ρ_i`, `s ≤ 1` and `X_b ⪰ 0`,
/// with `ρ_i = Σ‖C_i‖_F + |c_i|`. A margin of at least `tol` is feasible,
/// at most `−tol` infeasible, and anything between indeterminate. The
/// solver stops early once the sign of the margin is settled.
pub fn sdp_feasibility(
    dims: &[usize],
    constraints: &[SdpConstraint],
    opts: &SolverOptions,
) -> Result<FeasibilityReport, ConicError> {
    for c in constraints {
        for (b, m) in &c.terms {
            if *b >= dims.len() || m.dim() != dims[*b] {
                return Err(ConicError::DimensionMismatch(format!(
                    "constraint term on block {b} has order {}",
                    m.dim()
                )));
            }
        }
    }
    let tol = opts.tol;
    let mut pb = ProgramBuilder::new();
    let vars: Vec<HermitianVar> = dims.iter().map(|&n| pb.add_hermitian_psd(n)).collect();
    let s = pb.add_var();
    pb.minimize(LinExpr::term(s, -1.0));
    pb.add_le(s, 1.0);
    for c in constraints {
        let rho = c.scale();
        let mut e = LinExpr::constant(c.constant / rho);
        for (b, m) in &c.terms {
            e += vars[*b].trace_with(m) * (1.0 / rho);
        }
        match c.relation {
            SdpRelation::LessEq => pb.add_le(e + s, 0.0),
            SdpRelation::Equal => pb.add_eq(e),
        }
    }
    let prog = pb.build()?;
    let sopts = SolverOptions {
        primal_target: Some(-tol),
        dual_target: Some(tol),
        ..*opts
    };
    let sol = prog.solve(&sopts)?;
    let recover = |x: &[f64]| -> Vec<HermitianMatrix<Complex64>> {
        vars.iter().map(|v| v.value(x)).collect()
    };
    let verified = |xs: &[HermitianMatrix<Complex64>]| verify(xs, constraints, tol);

    let margin = -sol.primal_objective;
    let outcome = match sol.status {
        SolveStatus::PrimalInfeasible | SolveStatus::DualTargetReached => FeasibilityOutcome::Infeasible,
        SolveStatus::Optimal | SolveStatus::PrimalTargetReached | SolveStatus::NumericLimit => {
            let xs = recover(&sol.x);
            if margin >= tol && sol.residuals.primal <= tol && verified(&xs) {
                FeasibilityOutcome::Feasible(xs)
            } else if sol.status == SolveStatus::Optimal && margin <= -tol {
                FeasibilityOutcome::Infeasible
            } else if sol.residuals.dual <= tol && -sol.dual_objective <= -tol {
                FeasibilityOutcome::Infeasible
            } else {
                FeasibilityOutcome::Indeterminate
            }
        }
        // The margin program is bounded above by construction.
        SolveStatus::DualInfeasible => FeasibilityOutcome::Indeterminate,
    };
    Ok(FeasibilityReport {
        outcome,
        margin,
        solver_status: sol.status,
        iterations: sol.iterations,
    })
}

/// Direct check of the constraints and of semidefiniteness.
fn verify(xs: &[HermitianMatrix<Complex64>], constraints: &[SdpConstraint], tol: f64) -> bool {
    let psd = xs.iter().all(|x| match hermitian_eigenvalues(x) {
        Ok(ev) => *ev.last().unwrap_or(&0.0) >= -tol * x.trace_real().abs().max(1.0),
        Err(_) => false,
    });
    psd && constraints.iter().all(|c| {
        let v = c.eval(xs) / c.scale();
        match c.relation {
            SdpRelation::LessEq => v <= tol,
            SdpRelation::Equal => v.abs() <= tol,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real_diag(d: &[f64]) -> HermitianMatrix<Complex64> {
        HermitianMatrix::from_real_diag(d)
    }

    #[test]
    fn trace_one_balanced_is_feasible() {
        let cons = vec![
            SdpConstraint::equal(vec![(0, real_diag(&[1.0, 1.0]))], -1.0),
            SdpConstraint::equal(vec![(0, real_diag(&[1.0, -1.0]))], 0.0),
        ];
        let rep = sdp_feasibility(&[2], &cons, &SolverOptions::default()).unwrap();
        let FeasibilityOutcome::Feasible(xs) = rep.outcome else {
            panic!("expected feasible, got {rep:?}");
        };
        assert!((xs[0][(0, 0)].re - 0.5).abs() < 1e-6);
        assert!((xs[0][(1, 1)].re - 0.5).abs() < 1e-6);
    }

    #[test]
    fn negative_trace_is_infeasible() {
        let cons = vec![SdpConstraint::equal(vec![(0, real_diag(&[1.0, 1.0]))], 1.0)];
        let rep = sdp_feasibility(&[2], &cons, &SolverOptions::default()).unwrap();
        assert!(matches!(rep.outcome, FeasibilityOutcome::Infeasible), "{rep:?}");
    }

    #[test]
    fn inequality_margin_sign() {
        // tr(X) ≤ 1 and X_11 ≥ 2 cannot both hold.
        let cons = vec![
            SdpConstraint::less_eq(vec![(0, real_diag(&[1.0, 1.0]))], -1.0),
            SdpConstraint::less_eq(vec![(0, real_diag(&[-1.0, 0.0]))], 2.0),
        ];
        let rep = sdp_feasibility(&[2], &cons, &SolverOptions::default()).unwrap();
        assert!(matches!(rep.outcome, FeasibilityOutcome::Infeasible), "{rep:?}");

        let cons = vec![
            SdpConstraint::less_eq(vec![(0, real_diag(&[1.0, 1.0]))], -3.0),
            SdpConstraint::less_eq(vec![(0, real_diag(&[-1.0, 0.0]))], 2.0),
        ];
        let rep = sdp_feasibility(&[2], &cons, &SolverOptions::default()).unwrap();
        assert!(rep.outcome.is_feasible(), "{rep:?}");
    }
}
