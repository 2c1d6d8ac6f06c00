use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("class {class} has no samples")]
    EmptyClass { class: usize },
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("invalid training configuration: {detail}")]
    InvalidConfig { detail: String },
    #[error("dataset inconsistency: {detail}")]
    DataMismatch { detail: String },
    #[error(transparent)]
    Model(#[from] cgat_model::ModelError),
    #[error(transparent)]
    Graph(#[from] cgat_graph::GraphError),
    #[error(transparent)]
    Tensor(#[from] cgat_tensor::TensorError),
}

pub type Result<T> = std::result::Result<T, TrainError>;
