use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("trace is not 1 (got {trace})")]
    BadTrace { trace: f64 },

    #[error("operators are not trace preserving (completeness residual {residual:e})")]
    NotTracePreserving { residual: f64 },

    #[error("bias matrix column {column} sums to {sum} (expected 1)")]
    NotStochastic { column: usize, sum: f64 },

    #[error("bias matrix entry ({row}, {column}) is negative: {value}")]
    NegativeBias { row: usize, column: usize, value: f64 },

    #[error("unknown outcome label {0}")]
    UnknownLabel(String),

    #[error("duplicate outcome label {0}")]
    DuplicateLabel(String),

    #[error("empty word")]
    EmptyWord,

    #[error("word composition needs {kraus_count} Kraus operators, above the cap of {cap}")]
    WordTooLong { kraus_count: usize, cap: usize },

    #[error("no fixed point found (smallest singular value of rep - I is {residual:e})")]
    NoFixedPoint { residual: f64 },

    #[error("map is zero")]
    ZeroMap,

    #[error("all outcome probabilities vanish (max {max_probability:e})")]
    DegenerateDistribution { max_probability: f64 },

    #[error("estimated state collapsed at step {step}: outcome probability {probability:e}")]
    FilterCollapse { step: usize, probability: f64 },

    #[error("kernel condition ker(estimate) within ker(true state) is violated")]
    KernelConditionViolated,

    #[error("horizon enumeration needs {words} words, above the cap of {cap}")]
    HorizonTooLarge { words: f64, cap: usize },

    #[error("prefix probability vanishes at position {position}")]
    ZeroPrefixProbability { position: usize },

    #[error("operators do not form a perfect unraveling (residual {residual:e})")]
    NotUnraveling { residual: f64 },

    #[error("measure needs {atoms} atoms, above the budget of {cap}")]
    AtomBudgetExceeded { atoms: usize, cap: usize },

    #[error("measure has {atoms} atoms, above the LP cap of {cap}")]
    TooManyAtoms { atoms: usize, cap: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
