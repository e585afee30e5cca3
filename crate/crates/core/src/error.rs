use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Overflow(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Singularity(String),
    #[error("{0}")]
    Tolerance(String),
    #[error("{0}")]
    Resonance(String),
    #[error("{0}")]
    NoRoot(String),
    #[error("{0}")]
    Quadrature(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Infeasible(String),
}

impl Error {
    /// Short machine-readable tag, used in CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Overflow(_) => "overflow",
            Error::Config(_) => "config",
            Error::Singularity(_) => "singularity",
            Error::Tolerance(_) => "tolerance",
            Error::Resonance(_) => "resonance",
            Error::NoRoot(_) => "no-root",
            Error::Quadrature(_) => "quadrature",
            Error::Convergence(_) => "convergence",
            Error::Infeasible(_) => "infeasible",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
