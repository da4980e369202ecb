use std::path::{Path, PathBuf};

use motimem::pipeline::PipelineError;
use motimem::stream::StreamError;
use motimem::MetricsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag values the parser could not catch.
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: StreamError },
    #[error("{}: {source}", path.display())]
    Output { path: PathBuf, source: StreamError },
    #[error("{}: no .pgm/.ppm/.pnm frames found", .0.display())]
    NoFrames(PathBuf),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Pipeline(PipelineError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn input(path: &Path) -> impl FnOnce(StreamError) -> CliError + '_ {
        move |source| CliError::Input {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn output(path: &Path) -> impl FnOnce(StreamError) -> CliError + '_ {
        move |source| CliError::Output {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input { .. }
            | CliError::Output { .. }
            | CliError::NoFrames(_)
            | CliError::Metrics(_) => 2,
            CliError::Pipeline(e) => match e {
                PipelineError::KRange { .. } => 1,
                PipelineError::Alignment(_)
                | PipelineError::NoFrames
                | PipelineError::Metrics(_) => 2,
                PipelineError::Codec(_) => 3,
            },
            CliError::Internal(_) => 3,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}
