//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,

    #[error("frictionless value infinite")]
    InfiniteValue,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("utility gap undefined: U(0) is not finite")]
    GapUndefined,

    #[error("grid anisotropy violates monotone stencil; adjust mesh ratio")]
    NonMonotoneStencil,

    #[error("policy jump target outside grid")]
    JumpOutsideGrid,

    #[error("reducible chain or degenerate grid")]
    ReducibleChain,

    #[error("policy iteration did not converge within {max_iters} iterations")]
    MaxIters {
        max_iters: usize,
        /// Last iterate, for diagnosis.
        last: Box<crate::solver::PolicySolution>,
    },

    #[error("smooth-fit system has no positive root pair; costs too large for the grid-free solution")]
    NoRootPair,

    #[error("not enough boundary points for a quadratic fit: {0} < 6")]
    TooFewBoundaryPoints(usize),

    #[error("no-trade set is empty")]
    EmptyNoTrade,

    #[error("indefinite discretization for the wealth ODE; refine the grid or raise beta")]
    IndefiniteOde,
}
