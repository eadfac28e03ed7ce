use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Numerical(#[from] leapfrog::Error),

    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),

    #[error("{failed} verification criteria failed")]
    Verification { failed: usize },
}

impl CliError {
    /// 1 for configuration problems, 2 for numerical or output failures,
    /// 3 when verification criteria fail.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Numerical(_) | CliError::Output(_) => 2,
            CliError::Verification { .. } => 3,
        }
    }
}
