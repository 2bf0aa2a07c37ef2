use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("parameter space must declare at least one variable")]
    Empty,
    #[error("variable `{name}` is declared more than once")]
    DuplicateName { name: String },
    #[error("variable `{name}` needs finite bounds with min < max")]
    InvalidBounds { name: String },
    #[error("categorical variable `{name}` needs at least two distinct non-empty levels")]
    InvalidLevels { name: String },
    #[error("value `{value}` is outside the domain of variable `{name}`")]
    ValueOutOfDomain { name: String, value: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("coordinate {index} = {value} is outside [0, 1]")]
    OutsideUnitCube { index: usize, value: f64 },
    #[error("variable `{name}` is not categorical or the level index is out of range")]
    NotCategorical { name: String },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: model expects {expected} inputs, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid model: {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<ModelError>,
    },
    #[error("failed to parse model: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ModelError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ModelError::Invalid { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn at(self, path: impl Into<PathBuf>) -> Self {
        ModelError::File { path: path.into(), source: Box::new(self) }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("objective `{name}` does not provide gradients")]
    MissingGradient { name: String },
    #[error("degenerate bounds [{lower}, {upper}]")]
    DegenerateBounds { lower: f64, upper: f64 },
    #[error("problem has {objectives} objectives but {bounds} bounds")]
    BoundsMismatch { objectives: usize, bounds: usize },
    #[error("target objective {target} out of range for {objectives} objectives")]
    BadTarget { target: usize, objectives: usize },
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("objective `{name}` expects {expected} inputs but the space encodes {actual}")]
    InputDim { name: String, expected: usize, actual: usize },
    #[error("need at least {needed} objectives, got {actual}")]
    TooFewObjectives { needed: usize, actual: usize },
    #[error("objective `{name}` has bounds with lower >= upper")]
    BadBounds { name: String },
    #[error("duplicate objective name `{name}`")]
    DuplicateObjective { name: String },
    #[error("categorical enumeration would produce {count} sub-problems, cap is {cap}")]
    TooManyCombinations { count: usize, cap: usize },
    #[error("`{name}` is not a categorical variable")]
    NotCategorical { name: String },
    #[error("unknown variable `{name}`")]
    UnknownVariable { name: String },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("invalid solver settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Frontier(#[from] FrontierError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrontierError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("middle point lies outside the rectangle")]
    MidOutsideRect,
    #[error("frontier is empty")]
    Empty,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("grid factor must be at least 2")]
    BadGrid,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("grid of {evaluations} evaluations exceeds the cap of {cap}")]
    CapExceeded { evaluations: u128, cap: u128 },
    #[error("convex hull extraction needs exactly 2 objectives, got {0}")]
    UnsupportedDimension(usize),
    #[error("empty point set")]
    Empty,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}
