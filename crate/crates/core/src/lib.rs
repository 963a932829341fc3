//! Rank-two amplify-and-forward relay multicast beamforming: channel
//! generation, the four-slot signal model, max-min SNR design by convex
//! inner approximation and by semidefinite relaxation, and a Monte Carlo
//! link simulator that checks the closed forms.

pub mod cccp;
pub mod linksim;
pub mod model;
pub mod scenario;
pub mod sdr;
pub mod units;

pub use model::{BeamformerSolution, Normalization, PowerBudget, ProblemData, Rank, Violation};
pub use scenario::{ChannelRealization, NetworkGeometry, PathlossModel, Scenario};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("power factor a must be positive, got {0}")]
    NonPositivePowerFactor(f64),
    #[error("objective t must be positive, got {0}")]
    NonPositiveObjective(f64),
    #[error("no feasible starting point: every destination has zero SNR")]
    InitializationFailed,
    #[error("every grid point of the relaxation is infeasible")]
    RelaxationInfeasible,
    #[error("no randomized candidate could be made feasible")]
    RandomizationFailed,
    #[error("cone solver: {0}")]
    Conic(#[from] relaycast_conic::ConicError),
    #[error("linear algebra: {0}")]
    Linalg(#[from] relaycast_linalg::LinalgError),
}
