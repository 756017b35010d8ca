use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("difference set search for n={n}, d={d} exhausted its budget of {budget} nodes")]
    BudgetExhausted { n: usize, d: usize, budget: u64 },

    #[error("no difference set containing 0 and 1 exists for n={n}, d={d}")]
    NoDifferenceSet { n: usize, d: usize },

    #[error("no known (n,d,1) design of block size {d}")]
    UnsupportedOrder { d: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(
        "unstable system: replication {replication} reached {in_system} jobs in system at t={time:.3}"
    )]
    Instability {
        replication: usize,
        in_system: usize,
        time: f64,
    },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameters(msg.into())
}
