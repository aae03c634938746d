use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    Assertion(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) | Self::Io(_) => 2,
            Self::NonConvergence(_) => 3,
            Self::Assertion(_) => 4,
        }
    }
}

impl From<oligonet::Error> for CliError {
    fn from(e: oligonet::Error) -> Self {
        let converged = match &e {
            oligonet::Error::NonConvergence { .. } => false,
            oligonet::Error::OracleFailure { source, .. } => {
                !matches!(**source, oligonet::Error::NonConvergence { .. })
            }
            _ => true,
        };
        if converged {
            Self::Validation(e.to_string())
        } else {
            Self::NonConvergence(e.to_string())
        }
    }
}
