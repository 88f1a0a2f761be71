use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("polytope is empty")]
    EmptyPolytope,
    #[error("polytope is unbounded")]
    UnboundedPolytope,
    #[error("rejection budget exhausted and hit-and-run could not start: {0}")]
    RejectionBudgetExhausted(String),
    #[error("lower-level feasible set is empty")]
    EmptyFeasibleSet,
    #[error("joint feasible region is empty")]
    EmptyJointPolytope,
    #[error("leader decision {0:?} is outside the domain of the reaction map")]
    OutsideDomain(Vec<f64>),
    #[error("density integrates to zero over the sample batch")]
    ZeroDensityMass,
    #[error("expression evaluation failed: {0}")]
    ExpressionEval(String),
    #[error("leader domain is empty")]
    EmptyDomain,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("degenerate face (area {0:e})")]
    DegenerateFace(f64),
    #[error("unsupported face dimension {0}")]
    UnsupportedDimension(usize),
    #[error("point {0:?} is outside the simplex")]
    OutsideSimplex(Vec<f64>),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("joint feasible region is unbounded")]
    UnboundedFeasibleRegion,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown builtin problem `{0}`")]
    UnknownBuiltin(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Syntax {
            line,
            column,
            message: message.into(),
        }
    }
}
