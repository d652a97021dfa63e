use thiserror::Error;

/// Errors produced by the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or precondition check failed before any computation ran.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A simulator produced a non-finite state value.
    #[error("simulation unstable at t = {t}: {what}")]
    Unstable { t: f64, what: String },

    /// The estimate norm exceeded the divergence guard.
    #[error("estimator diverged at t = {t} (||alpha|| = {norm:.3e})")]
    Diverged { t: f64, norm: f64 },

    /// The requested plant has no closed-form transfer function.
    #[error("no closed-form transfer function for this plant; use the truncated-series evaluation")]
    NoClosedForm,

    /// A matrix handed to the eigensolver failed its entry checks.
    #[error("bad matrix: {0}")]
    BadMatrix(String),

    /// A scalar root search could not bracket or refine a root.
    #[error("root finding failed: {0}")]
    RootFinding(String),

    /// Persistency level was not positive, so the tail ratio is undefined.
    #[error("excitation level kappa = {kappa:.3e} is not positive at n = {n}")]
    NotExcited { n: usize, kappa: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
