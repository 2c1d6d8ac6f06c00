use thiserror::Error;

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {detail}")]
    InvalidConfig { detail: String },
    #[error("unknown architecture '{0}'")]
    UnknownArchitecture(String),
    #[error("batch does not match model config: {detail}")]
    ConfigMismatch { detail: String },
    #[error("baseline architectures take plain batches, got one with CLS nodes")]
    ClsNodePresent,
    #[error("this architecture needs CLS-augmented batches")]
    MissingCls,
    #[error("corrupt checkpoint: {detail}")]
    CorruptCheckpoint { detail: String },
    #[error(transparent)]
    Tensor(#[from] cgat_tensor::TensorError),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}
