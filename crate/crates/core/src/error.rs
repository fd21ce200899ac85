use thiserror::Error;

use crate::kernels::KernelFamily;
use crate::solver::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("index {t} is outside the {family} kernel domain")]
    IndexOutOfDomain { family: KernelFamily, t: f64 },

    #[error("{family} kernel overflowed at t = {t}, y = {y}")]
    Overflow { family: KernelFamily, t: f64, y: f64 },

    #[error("invalid observation {y} for the {family} kernel")]
    InvalidObservation { family: KernelFamily, y: f64 },

    #[error("product index v({t}, {s}) = {v} leaves the transform existence region")]
    NotClosed { t: f64, s: f64, v: f64 },

    #[error("operation is not supported for the {0} kernel")]
    Unsupported(KernelFamily),

    #[error("model {model} does not support the {family} kernel")]
    UnsupportedKernel { model: String, family: KernelFamily },

    #[error("conditional transform diverges at t = {t}")]
    TransformDiverges { t: f64 },

    #[error("conditional moments of order {order} are undefined for model {model}")]
    MomentsUndefined { model: String, order: u32 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{0} is not available for this model")]
    NotAvailable(&'static str),

    #[error("invalid point set: {0}")]
    InvalidPointSet(String),

    #[error("time series must contain at least two finite observations")]
    SeriesTooShort,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("conditional covariance is identically zero")]
    DegenerateCovariance,

    #[error("reference information matrix is singular")]
    SingularReference,

    #[error("information supremum lies on the window boundary at t = {t} (value {info})")]
    NoInteriorMaximum { t: f64, info: f64 },

    #[error("estimating equations are functionally dependent (numerical rank {rank} < {dim})")]
    DegenerateSystem { rank: usize, dim: usize },

    #[error("solver did not converge (residual {:.3e} after {} iterations)", .0.residual_norm, .0.iterations)]
    NonConvergence(Box<SolveReport>),

    #[error("Jacobian is numerically singular (condition number {:.3e})", .0.jacobian_condition)]
    SingularJacobian(Box<SolveReport>),
}
