use thiserror::Error;

/// Errors produced by the analytics, learners and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("policy induces a reducible chain ({closed_classes} closed classes)")]
    ReducibleChain { closed_classes: usize },

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("MDP is not communicating: state {target} is unreachable from state {from}")]
    NotCommunicating { from: usize, target: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid model at `{field}`: {message}")]
    InvalidModel { field: String, message: String },

    #[error("episode bound violated: {episodes} episodes > bound {bound:.3}")]
    EpisodeBoundViolated { episodes: usize, bound: f64 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by the user's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ReducibleChain { .. }
                | Error::SingularSystem(_)
                | Error::NoConvergence { .. }
                | Error::NotCommunicating { .. }
                | Error::NumericalFailure(_)
                | Error::EpisodeBoundViolated { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
