//! Reconstruction engine: reverse-diffusion prior steps interleaved with
//! self-supervised data-consistency updates over disentangled latents and
//! refinement-network parameters.

pub mod algorithm;
pub mod baselines;
pub mod cgtape;
pub mod dc;
pub mod denoiser;
pub mod refine;

pub use algorithm::{reconstruct, ReconConfig, ReconResult};
pub use baselines::{baseline_joint_sparsity, baseline_zero_filled, JointSparsityConfig};
pub use dc::{dc_loss, dc_loss_grad, dc_update, DcContext, DcUpdateConfig, LatentState};
pub use denoiser::RefinementParams;
pub use refine::refine;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("CG breakdown (near-zero curvature) at iteration {0}")]
    CgBreakdown(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite loss during data-consistency update at step {0}")]
    NonFiniteLoss(usize),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("line search failed after {0} backtracking steps")]
    LineSearch(usize),
    #[error(transparent)]
    Autodiff(#[from] mdr_autodiff::AdError),
    #[error(transparent)]
    Mri(#[from] mdr_mri::MriError),
    #[error(transparent)]
    Rep(#[from] mdr_rep::RepError),
    #[error(transparent)]
    Diffusion(#[from] mdr_diffusion::DiffusionError),
}

pub type Result<T> = std::result::Result<T, ReconError>;
