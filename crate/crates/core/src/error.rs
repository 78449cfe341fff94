use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("transverse grid too small: {0}")]
    GridTooSmall(String),
    #[error("eigensolver did not converge: {0}")]
    ConvergenceFailure(String),
    #[error("singular shifted system: {0}")]
    SingularSystem(String),
    #[error("sum over states not converged: {0}")]
    TruncationNotConverged(String),
    #[error("matrix element leaks into the grid edge: {0}")]
    TailContribution(String),
    #[error("orbit does not reach the boundary: {0}")]
    NoCollision(String),
    #[error("no sign change found: {0}")]
    BracketFailure(String),
    #[error("curvature too large for first-order hop formulas: {0}")]
    CurvatureTooLarge(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("packet overlaps the bend: {0}")]
    PacketOverlapsBend(String),
    #[error("linear solve failed: {0}")]
    SolveFailure(String),
    #[error("final state not asymptotic: {0}")]
    NotAsymptotic(String),
}

pub type Result<T> = std::result::Result<T, Error>;
