use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the formula is defined.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// An argument (state variable) lies outside its admissible interval.
    #[error("argument out of domain: {0}")]
    Domain(String),

    /// Motility profile produced a non-positive switching rate.
    #[error("model configuration: {0}")]
    ModelConfig(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Requested time step exceeds the admissible bound.
    #[error("time step {dt:e} exceeds admissible bound {max:e}")]
    Cfl { dt: f64, max: f64 },

    #[error("numerical divergence at t = {t}: {what}")]
    Divergence { t: f64, what: String },

    #[error("{0}")]
    Fit(String),

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
