//! Dense real and complex linear algebra for small problems.
//!
//! Every kernel is generic over [`Scalar`] so the same code serves the
//! complex beamforming model and the real-valued cone solver.

mod chol;
mod eig;
mod lu;
mod matrix;
mod scalar;
mod svd;

pub use chol::{cholesky, solve_lower, solve_lower_adjoint};
pub use eig::{hermitian_eig, hermitian_eigenvalues, Eigen};
pub use lu::{solve_linear, LuFactor, MAX_CONDITION};
pub use matrix::{ComplexMatrix, HermitianMatrix, Matrix, RealMatrix};
pub use num_complex::Complex64;
pub use scalar::{dot_conj, norm2, Scalar};
pub use svd::{svd, Svd};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (relative defect {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("iteration did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is singular at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("matrix is ill-conditioned (condition estimate {estimate:e})")]
    IllConditioned { estimate: f64 },
}
