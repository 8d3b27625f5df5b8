use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("conditioning threshold has zero probability mass")]
    ZeroDenominator,
    #[error("category {0} has no observations")]
    EmptyCategory(String),
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid predictor specification: {0}")]
    InvalidSpec(String),
    #[error("column `{0}` has too few observed values to act as PMM donors")]
    InsufficientDonors(String),
    #[error("unknown category `{value}` for predictor `{predictor}`")]
    UnknownCategory { predictor: String, value: String },
    #[error("quasi-separation detected: coefficients diverge without a penalty")]
    Separation,
    #[error("design matrix is rank deficient (collinear columns)")]
    Singular,
    #[error("optimiser did not converge: {0}")]
    NonConvergence(String),
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
    #[error("token set is empty")]
    EmptyTokenSet,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("models are not nested: full log-likelihood below reduced")]
    NotNested,
    #[error("only one outcome class present")]
    OneClassOnly,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("too few members per class for stratification: {0}")]
    TooFewPerClass(String),
    #[error("{0} tokens exceeds exact enumeration limit of {1}")]
    TooManyTokens(usize, usize),
    #[error("token `{0}` does not parse as name_value")]
    UnmappableToken(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
