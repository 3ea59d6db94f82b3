//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameter outside its mathematical domain (order s, exponents, radii...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Mesh failed structural validation; each entry names an offending entity.
    #[error("mesh validation failed:\n{}", issues.join("\n"))]
    MeshValidation { issues: Vec<String> },

    /// A linear system could not be solved (non-SPD matrix, CG breakdown...).
    #[error("linear solve failed ({route}): {msg}")]
    LinearSolve { route: String, msg: String },

    /// Nonlinear iteration stopped without reaching the tolerance.
    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    /// Malformed input file.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn parse(path: &std::path::Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            line,
            msg: msg.into(),
        }
    }
}
