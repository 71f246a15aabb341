//! Small differentiable-network core: conv/pool/dense layers with batched
//! reverse-mode gradients, Adam, He initialization and Polyak averaging.

mod adam;
pub mod checkpoint;
mod kernels;
mod network;
mod tensor;

pub use adam::Adam;
pub use network::{Gradients, Head, InputShape, Network, NetworkSpec, Tape, Want};
pub use tensor::Tensor;
