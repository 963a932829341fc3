//! Primal-dual interior-point solver for cone programs over products of the
//! nonnegative orthant, second-order cones (plain and rotated) and real
//! PSD cones, with a builder that lowers complex Hermitian PSD variables to
//! real form.

mod cone;
mod expr;
mod feasibility;
mod program;
mod scaling;
mod solver;

pub use cone::{smat, svec, svec_index, Cone};
pub use expr::{LinExpr, Var};
pub use feasibility::{sdp_feasibility, FeasibilityOutcome, FeasibilityReport, SdpConstraint, SdpRelation};
pub use program::{BlockId, ConeProgram, HermitianVar, ProgramBuilder};
pub use solver::{ConeSolution, IterationInfo, Residuals, SolveStatus, SolverOptions};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid cone {0}")]
    InvalidCone(String),
    #[error("problem data contains non-finite values")]
    NonFinite,
    #[error("solver options out of range")]
    InvalidOptions,
}
