use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("index out of range in `{reference}`: {msg}")]
    IndexOutOfRange { reference: String, msg: String },

    #[error("unbound variable {0}")]
    UnboundVariable(String),

    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),

    #[error("division by series with zero constant term")]
    ZeroConstantTerm,

    #[error("inadmissible base value for {op}: {reason}")]
    InadmissibleBase { op: String, reason: String },

    #[error("invalid variable index {index} for arity {arity}")]
    BadVariableIndex { index: usize, arity: usize },

    #[error("domain guard `{guard}` vanishes at evaluation point")]
    GuardViolation { guard: String },

    #[error("no guard-satisfying sample found after {retries} retries")]
    SamplingExhausted { retries: usize },

    #[error(
        "second-derivative block asymmetric for A={a}, ({alpha},{beta}): \
         difference {witness}"
    )]
    JetAsymmetry {
        a: usize,
        alpha: usize,
        beta: usize,
        witness: String,
    },

    #[error("slope is characteristic: det V = 0")]
    CharacteristicSlope,

    #[error("linear system for the tilted 2-jet is {kind} in block {block}")]
    TiltedJetUnsolvable { kind: String, block: String },

    #[error("basis is not an integral element: {witness}")]
    NotIntegral { witness: String },

    #[error("degenerate linear system: {0}")]
    DegenerateSystem(String),

    #[error("compatibility conditions fail at the base point: {0}")]
    IncompatibleAtBase(String),

    #[error("nonzero residual: {0}")]
    ResidualFailure(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("expression is nowhere defined: denominator is identically zero")]
    NowhereDefined,
}

pub type Result<T> = std::result::Result<T, Error>;
