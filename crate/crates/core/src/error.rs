use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite {what}{}", .index.map(|i| format!(" at grid index {i}")).unwrap_or_default())]
    Numeric { what: String, index: Option<usize> },

    #[error("output domain too small: lost mass {lost:.3e}")]
    Coverage { lost: f64 },

    #[error("sigma too large: negative mass {negative_mass:.3e} exceeds 1e-3")]
    SigmaTooLarge { negative_mass: f64 },

    #[error("cholesky failed even with jitter {jitter:.3e}")]
    Conditioning { jitter: f64 },

    #[error("variational density puts mass {mass:.3e} outside the prior support")]
    Support { mass: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("log-scale domain error: {0}")]
    Domain(String),

    #[error("sampler aborted at iteration {iteration}: {source}")]
    Aborted { iteration: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
