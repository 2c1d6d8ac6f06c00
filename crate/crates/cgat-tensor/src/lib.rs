//! Reverse-mode autodiff on dense f64 tensors, sized for graph neural
//! networks: a growable tape, named parameter store, segment (per-target)
//! softmax and scatter reductions, and a checkpoint combinator that trades
//! recompute for memory on deep stacks.

mod error;
mod gradcheck;
mod ops;
mod param;
mod segment_ops;
mod tape;
mod tensor;

pub mod nn_ops;

pub use error::{Result, TensorError};
pub use gradcheck::grad_check;
pub use nn_ops::{gelu_grad_scalar, gelu_scalar, leaky_relu_scalar};
pub use param::{Param, ParamId, ParamStore};
pub use segment_ops::Segments;
pub use tape::{BackCtx, Tape, Var};
pub use tensor::{matmul, matmul_nt, matmul_tn, Tensor};
