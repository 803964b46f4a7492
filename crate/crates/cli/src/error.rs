use std::path::PathBuf;

/// Everything the command line can fail with, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration; exit code 1.
    Config(String),
    /// A stage ran before the one producing its input; exit code 1.
    MissingUpstream { stage: &'static str, path: PathBuf, run_first: &'static str },
    /// Input data that could not be used; exit code 2.
    Data(belief_landscape::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingUpstream { .. } => 1,
            CliError::Data(e) if !e.is_data_error() => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::MissingUpstream { stage, path, run_first } => write!(
                f,
                "`{stage}` needs {} which does not exist; run `{run_first}` first",
                path.display()
            ),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<belief_landscape::Error> for CliError {
    fn from(e: belief_landscape::Error) -> Self {
        CliError::Data(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
