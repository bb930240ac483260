use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or malformed arguments (length mismatches, ordering, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The objective cannot be evaluated (e.g. log of a zero density).
    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Two or more sites coincide; carries the offending site indices.
    #[error("duplicate sites: {}", format_pairs(.0))]
    DuplicateSites(Vec<(usize, usize)>),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

fn format_pairs(pairs: &[(usize, usize)]) -> String {
    pairs
        .iter()
        .map(|(i, j)| format!("{i}~{j}"))
        .collect::<Vec<_>>()
        .join(", ")
}
