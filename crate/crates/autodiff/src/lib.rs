//! Minimal differentiable-computation substrate: a fixed catalog of layer
//! primitives with analytic gradients, an Adam optimizer, a finite-difference
//! gradient checker and a unitary 2-D FFT.

pub mod error;
pub mod fft;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod params;
pub mod rng;
pub mod tensor;

pub use error::{AdError, Result};
pub use fft::{fft2_unitary, FftDirection};
pub use gradcheck::{central_diff, grad_check, rel_err, GradCheckReport};
pub use graph::{eval_loss_only, eval_with_gradients, init_graph_params, GraphNode, LossReduction};
pub use layers::{LayerSpec, Nonlinearity};
pub use params::{grad_accumulate, grad_scale, AdamConfig, GradStore, ParamStore};
pub use rng::{derive_seed, normal_tensor, rng_from};
pub use tensor::{idx3, Dtype, Tensor};
