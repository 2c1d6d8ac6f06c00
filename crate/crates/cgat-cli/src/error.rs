//! Process-level error classes. Usage problems (bad flags, bad config
//! values) exit with code 1; data and pipeline failures exit with code 2.
//! Every diagnostic renders as a single line.

use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(detail) => write!(f, "usage error: {detail}"),
            Self::Data(detail) => write!(f, "data error: {detail}"),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attach the offending path to an underlying failure.
pub fn file_error(path: &Path, err: impl fmt::Display) -> CliError {
    CliError::Data(format!("{}: {}", path.display(), err))
}

impl From<cgat_mesh::MeshError> for CliError {
    fn from(err: cgat_mesh::MeshError) -> Self {
        Self::Data(err.to_string())
    }
}

impl From<cgat_graph::GraphError> for CliError {
    fn from(err: cgat_graph::GraphError) -> Self {
        Self::Data(err.to_string())
    }
}

impl From<cgat_model::ModelError> for CliError {
    fn from(err: cgat_model::ModelError) -> Self {
        Self::Data(err.to_string())
    }
}

impl From<cgat_train::TrainError> for CliError {
    fn from(err: cgat_train::TrainError) -> Self {
        Self::Data(err.to_string())
    }
}

impl From<cgat_explain::ExplainError> for CliError {
    fn from(err: cgat_explain::ExplainError) -> Self {
        Self::Data(err.to_string())
    }
}

impl From<cgat_tensor::TensorError> for CliError {
    fn from(err: cgat_tensor::TensorError) -> Self {
        Self::Data(err.to_string())
    }
}
