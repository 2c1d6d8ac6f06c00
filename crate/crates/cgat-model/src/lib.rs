//! Graph classification architectures over the autodiff tape: the CLS-node
//! attention network plus degree-normalized and attention readout baselines,
//! all behind a name-keyed registry.

mod arch;
mod baselines;
mod cgat;
mod config;
mod error;
mod init;
mod model;
mod serialize;

pub use arch::{
    architecture, architecture_names, Architecture, AttentionRecord, ForwardCapture, RunMode,
};
pub use baselines::symmetric_normalization;
pub use config::{AttentionKind, HeadMerge, ModelConfig};
pub use error::{ModelError, Result};
pub use model::{Model, Prediction};
