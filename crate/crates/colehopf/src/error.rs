//! Crate-wide error type and the exit-code contract of the command-line tool.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library and the experiment runner.
///
/// Every variant maps to one of the documented process exit codes:
///
/// * `2` — configuration or input validation problems (bad config file,
///   malformed graph file, incompatible operands, out-of-range arguments),
/// * `3` — a numerical assertion failed (positivity floor, a comparison
///   bound, a conservation identity),
/// * `4` — the solver itself failed (eigensolver breakdown, blow-up of an
///   explicit time stepper, I/O trouble while writing artifacts).
#[derive(Debug, Error)]
pub enum Error {
    /// Configuration file rejected (syntax, unknown key, out-of-range value).
    #[error("config error: {0}")]
    Config(String),

    /// Graph construction rejected the input.
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// An argument was malformed or outside its documented range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two operands do not live on the same graph, grid or level.
    #[error("incompatible operands: {0}")]
    Incompatible(String),

    /// A mathematical guarantee was violated at run time.
    #[error("numerical assertion failed: {0}")]
    NumericalAssertion(String),

    /// A numerical routine could not produce a usable result.
    #[error("solver failure: {0}")]
    Solver(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI wrapper.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidGraph(_)
            | Error::InvalidInput(_)
            | Error::Incompatible(_) => 2,
            Error::NumericalAssertion(_) => 3,
            Error::Solver(_) | Error::Io(_) => 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_documented_contract() {
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(Error::InvalidGraph("x".into()).exit_code(), 2);
        assert_eq!(Error::InvalidInput("x".into()).exit_code(), 2);
        assert_eq!(Error::Incompatible("x".into()).exit_code(), 2);
        assert_eq!(Error::NumericalAssertion("x".into()).exit_code(), 3);
        assert_eq!(Error::Solver("x".into()).exit_code(), 4);
        let io = Error::Io(std::io::Error::new(std::io::ErrorKind::Other, "x"));
        assert_eq!(io.exit_code(), 4);
    }
}
