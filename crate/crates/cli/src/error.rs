use ksreg::KsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or input text.
    #[error("{0}")]
    Usage(String),
    /// The state itself is outside the domain (collision, pole, unbound orbit, ...).
    #[error("{0}")]
    Domain(String),
    /// The numerics gave up (step limit, solver divergence).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    /// Prefixes the message with the index of the record that failed.
    pub fn at_record(self, index: usize) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("record {index}: {m}")),
            CliError::Domain(m) => CliError::Domain(format!("record {index}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("record {index}: {m}")),
        }
    }
}

impl From<KsError> for CliError {
    fn from(e: KsError) -> Self {
        match e {
            KsError::InvalidInput(_) => CliError::Usage(e.to_string()),
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
