use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Error)]
pub enum DunklError {
    /// `beta * k(alpha) <= 1` for some root: jump rates diverge.
    #[error("regime error: {0}")]
    Regime(String),

    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("group of order {order} exceeds the cap {cap}")]
    Size { order: usize, cap: usize },

    /// A point sits exactly on a chamber wall where a root functional vanishes.
    #[error("point lies on the wall of root {root}")]
    Wall { root: usize },

    #[error("step control failed at t = {t}: chamber exit persisted after {halvings} halvings")]
    Step { t: f64, halvings: u32 },

    #[error("closed form requires unit multiplicities")]
    UnsupportedMultiplicity,

    #[error("query outside the cached ray grid: s = {s}, grid = [{min}, {max}]")]
    Extrapolation { s: f64, min: f64, max: f64 },

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("integrator step size fell below the floor at t = {t}")]
    Stiffness { t: f64 },

    #[error("insufficient range: {0}")]
    InsufficientRange(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl DunklError {
    /// True for failures caused by the physical parameter regime rather than
    /// numerics or bad input shapes.
    pub fn is_regime(&self) -> bool {
        matches!(
            self,
            DunklError::Regime(_) | DunklError::UnsupportedMultiplicity
        )
    }
}

pub type Result<T> = std::result::Result<T, DunklError>;
