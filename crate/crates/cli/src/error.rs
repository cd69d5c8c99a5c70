use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The config text did not parse or failed schema validation.
    #[error("config error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("config error in {field}: {message}")]
    Field { field: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] waist_core::Error),
}

impl CliError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Field { field: field.into(), message: message.into() }
    }

    /// Process exit status for this failure: 2 when a solver ran out of
    /// iterations, 1 for every input problem.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(waist_core::Error::NotConverged { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_solver_stalls_exit_with_two() {
        let stalled = CliError::Core(waist_core::Error::NotConverged { iterations: 3, best: "0.1".into() });
        assert_eq!(stalled.exit_code(), 2);
        assert_eq!(CliError::Core(waist_core::Error::InvalidInput("x".into())).exit_code(), 1);
        assert_eq!(CliError::field("samples", "must be positive").exit_code(), 1);
        assert_eq!(CliError::Usage("no config".into()).exit_code(), 1);
    }
}
