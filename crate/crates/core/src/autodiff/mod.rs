//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.

pub mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{log_softmax, sigmoid, softmax, Binary, Gradients, Tape, Unary, Var};
pub use tensor::{DiffTensor, Tensor};
