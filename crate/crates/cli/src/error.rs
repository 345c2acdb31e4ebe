use std::path::PathBuf;

use sync_mesh_core::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    ConfigParse { path: String, line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("validation failed:\n{}", render(.0))]
    ValidationFailed(Vec<ValidationReport>),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] sync_mesh_core::Error),
}

fn render(reports: &[ValidationReport]) -> String {
    reports.iter().filter(|r| !r.passed()).map(|r| r.to_string()).collect()
}

impl CliError {
    /// 2 for problems with the input, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigParse { .. } | CliError::InvalidConfig(_) | CliError::ValidationFailed(_) => 2,
            _ => 1,
        }
    }
}

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
