//! Dense matrices, seeded randomness, activations, layer normalization and a
//! central-difference gradient checker.

mod activation;
mod gradcheck;
mod linalg;
mod matrix;
mod norm;
mod rng;

pub use activation::{relu, sigmoid, softmax, softmax_in_place, tanh};
pub use gradcheck::grad_check;
pub use linalg::random_orthogonal;
pub use matrix::Matrix;
pub(crate) use matrix::{gemm, View};
pub use norm::{layernorm, layernorm_backward, layernorm_forward, LayerNormCache};
pub use rng::Rng;
