use thiserror::Error;

/// Crate-wide error type.
///
/// Every variant except [`Error::SelfCheck`] reports a caller mistake
/// (bad parameters, an environment that fails validation, or a request
/// that exceeds the configured state budget). `SelfCheck` signals that an
/// internal identity verification failed, which means a corrupted
/// user-supplied callable or a bug.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("validation failed: {0}")]
    Validation(String),

    /// The limit formulas are proved only when the utility's θ equals
    /// σ̲/σ̄ and both reference points agree.
    #[error("coupling violated: utility has theta={theta}, c={utility_c}, but params give sigma_low/sigma_high={ratio}, c={params_c}")]
    Coupling {
        theta: f64,
        ratio: f64,
        utility_c: f64,
        params_c: f64,
    },

    #[error("state space exceeds cap: largest stage layer needs {needed} states, cap is {cap}")]
    StateSpace { needed: u64, cap: u64 },

    #[error("self-check failed: {0}")]
    SelfCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors a CLI should map to its "bad input" exit code.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::SelfCheck(_))
    }
}
