//! Error type shared by all modules.

/// Errors reported by the library.
///
/// Each variant corresponds to one failure class surfaced by the public API;
/// the CLI maps them onto its exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration: bad orders, mismatched options, malformed input files.
    #[error("configuration error: {0}")]
    Config(String),

    /// The impedance is not proper on the requested interval (nonpositive or
    /// non-square-integrable samples).
    #[error("invalid impedance: {0}")]
    InvalidImpedance(String),

    /// A precondition on the inputs does not hold (wrong grid layout,
    /// non-normalized impedance, missing coverage).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A requested quantity lies outside the resolvable range (series order
    /// exhausted, eigenvalue scan found fewer roots than requested).
    #[error("range error: {0}")]
    Range(String),

    /// An iterative scheme failed to converge within its budget.
    #[error("iteration limit: {0}")]
    Iteration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
