use lipset_core::LipsetError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data inconsistency: {0}")]
    Data(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }
}

impl From<LipsetError> for CliError {
    fn from(e: LipsetError) -> Self {
        match e {
            LipsetError::DimensionMismatch { .. }
            | LipsetError::NonPositiveLipschitz(_)
            | LipsetError::InvalidInput(_)
            | LipsetError::Io(_) => CliError::Usage(e.to_string()),
            LipsetError::UnboundedSlice | LipsetError::InconsistentData(_) | LipsetError::Json(_) => {
                CliError::Data(e.to_string())
            }
            LipsetError::Solver(_) => CliError::Solver(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
