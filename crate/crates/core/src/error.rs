use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("empty panel after filtering")]
    EmptyPanel,
    #[error("name pool exhausted for {0}")]
    PoolExhausted(String),
    #[error("insufficient funds for factorial balance: need {needed}, have {available}")]
    InsufficientFunds { needed: usize, available: usize },
    #[error("schedule infeasible for investors {0:?}")]
    InfeasibleSchedule(Vec<u64>),
    #[error("rank-deficient design; collinear columns: {0:?}")]
    RankDeficient(Vec<String>),
    #[error("identification failure: {0}")]
    Identification(String),
    #[error("optimizer did not converge after {iterations} iterations (best loglik {best:.6})")]
    NonConvergence { iterations: usize, best: f64, trace: Vec<f64> },
    #[error("malformed event log: {0}")]
    MalformedLog(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
