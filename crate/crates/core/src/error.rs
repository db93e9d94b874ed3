use std::io;

use thiserror::Error;

pub type Result<T, E = GdcError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GdcError {
    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero diagonal entry at index {index}")]
    ZeroDiagonal { index: usize },
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    ConvergenceFailure { sweeps: usize, off_norm: f64 },

    #[error("class `{label}` has no reference rows")]
    EmptyClass { label: String },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("regularization must be finite and non-negative, got {0}")]
    InvalidEps(f64),

    #[error("model must contain at least one component")]
    EmptyModel,
    #[error("prior {index} is negative or not finite")]
    NegativePrior { index: usize },
    #[error("priors sum to zero")]
    DegeneratePriors,
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("label sets differ: `{0}`")]
    LabelMismatch(String),
    #[error("class `{label}`: requested {requested} real rows, only {available} available")]
    InsufficientRealSamples { label: String, requested: usize, available: usize },
    #[error("class `{label}`: requested {requested} rows, only {available} available")]
    InsufficientSamples { label: String, requested: usize, available: usize },

    #[error("need at least {required} samples, got {n}")]
    TooFewSamples { n: usize, required: usize },
    #[error("component count {c} outside 1..={max}")]
    ComponentCountOutOfRange { c: usize, max: usize },
    #[error("Shapiro-Wilk needs at least 3 values, got {0}")]
    SampleTooSmall(usize),
    #[error("Shapiro-Wilk supports at most 5000 values, got {0}")]
    SampleTooLarge(usize),
    #[error("sample is constant")]
    ConstantSample,
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("template `{0}` has no `{{}}` placeholder")]
    MissingPlaceholder(String),
    #[error("template `{0}` has more than one `{{}}` placeholder")]
    RepeatedPlaceholder(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid label `{0}`")]
    InvalidLabel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad magic at byte {offset}: {found:?}")]
    BadMagic { offset: u64, found: Vec<u8> },
    #[error("unsupported version {version} at byte {offset}")]
    UnsupportedVersion { offset: u64, version: u16 },
    #[error("file truncated at byte {offset} while reading {context}")]
    TruncatedFile { offset: u64, context: String },
    #[error("non-finite value at byte {offset} in {context}")]
    NonFiniteValue { offset: u64, context: String },
    #[error("malformed file at byte {offset}: {reason}")]
    Malformed { offset: u64, reason: String },
    #[error("dimension mismatch at byte {offset}: {reason}")]
    FileDimensionMismatch { offset: u64, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("class `{label}`: {source}")]
    InClass {
        label: String,
        #[source]
        source: Box<GdcError>,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Coarse error category; the CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
    Shape,
}

impl GdcError {
    pub fn in_class(label: impl Into<String>, source: GdcError) -> Self {
        GdcError::InClass { label: label.into(), source: Box::new(source) }
    }

    /// Innermost error, skipping class annotations.
    pub fn root(&self) -> &GdcError {
        match self {
            GdcError::InClass { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        use GdcError::*;
        match self.root() {
            NotPositiveDefinite { .. } | ZeroDiagonal { .. } | ConvergenceFailure { .. } | ConstantSample => {
                ErrorKind::Numerical
            }
            DimensionMismatch { .. } | FileDimensionMismatch { .. } => ErrorKind::Shape,
            _ => ErrorKind::Input,
        }
    }
}
