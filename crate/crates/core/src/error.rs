use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value {value} at {location}")]
    NonFinite { location: String, value: f64 },

    #[error("zero vector has no angle{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    ZeroVector { context: Option<String> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("k = {k} exceeds sample size n = {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("empty tail: {0}")]
    EmptyTail(String),

    #[error("sample carries no real-valued targets")]
    MissingTargets,

    #[error("sample carries no labels")]
    MissingLabels,

    #[error("labels must be -1 or +1, found {value} at row {row}")]
    InvalidLabel { row: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid with {cells} cells exceeds the cap of {cap}")]
    GridTooLarge { cells: u128, cap: usize },

    #[error("model file: {0}")]
    Format(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite {
            location: format!("{what}[{i}]"),
            value: values[i],
        }),
        None => Ok(()),
    }
}
