use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Io(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ebb84_core::Error> for CliError {
    fn from(e: ebb84_core::Error) -> Self {
        match e {
            ebb84_core::Error::Numeric(m) => CliError::Numeric(m),
            ebb84_core::Error::Config(m) | ebb84_core::Error::Domain(m) => CliError::Config(m),
        }
    }
}
