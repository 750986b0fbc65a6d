use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid settings: {0}")]
    Settings(String),

    /// A constrained-prior sampler exhausted its proposal budget or its
    /// slice bracket collapsed before finding a point above the threshold.
    #[error("constrained sampler stalled at iteration {iteration}")]
    SamplerStall { iteration: usize },

    #[error("unsupported problem: {0}")]
    UnsupportedProblem(String),

    /// Every recorded likelihood is the -inf sentinel, so the evidence
    /// sum is identically zero.
    #[error("evidence undefined: all recorded likelihoods are -inf")]
    UndefinedEvidence,

    /// A dead/birth record list cannot be replayed as a constant-n_live run.
    #[error("malformed run at record {record}: {reason}")]
    MalformedRun { record: usize, reason: String },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
