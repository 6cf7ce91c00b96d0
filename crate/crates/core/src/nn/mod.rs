//! Minimal CPU neural-network kernels: tensors, convolution and dense
//! layers backed by GEMM, explicit backward passes and Adam.

pub mod ops;
pub mod optim;
pub mod params;
pub mod sequential;
pub mod tensor;

pub use optim::{Optimizer, OptimizerKind};
pub use params::{Grads, ParamTensor, Params};
pub use sequential::{Layer, Sequential, Tape};
pub use tensor::Tensor;
