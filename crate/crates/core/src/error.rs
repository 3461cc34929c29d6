use thiserror::Error;

use crate::bits::BitString;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("work budget exceeded: {what} needs {needed}, limit {limit}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("interval {interval} overlaps an already banned interval")]
    OverlapViolation { interval: String },

    #[error("no available space left to draw a seed from")]
    Exhausted,

    #[error("both branch estimates below prefix {prefix} are zero")]
    EmptyBranch { prefix: BitString },

    #[error("oracle contract violated: {0}")]
    OracleContract(String),

    #[error("no emission after {attempts} attempts")]
    NonTerminating { attempts: u64 },

    #[error("slave {slave} received an empty range")]
    DegeneratePartition { slave: usize },

    #[error("queue {slave} is empty, its slave is done and {remaining} of its range is unaccounted for")]
    Deadlock { slave: usize, remaining: String },

    #[error("dictionary entry {prefix} already holds {existing}, refusing {proposed}")]
    InconsistentEstimate {
        prefix: BitString,
        existing: u128,
        proposed: u128,
    },

    #[error("need at least {needed} runs, got {got}")]
    InsufficientRuns { needed: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
