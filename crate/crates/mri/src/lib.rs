//! The acquisition side of the inverse problem.
//!
//! Conventions: image stacks are complex `[nt, h, w]` tensors, coil maps
//! complex `[nc, h, w]`, k-space complex `[nt, nc, h, w]` in centered layout
//! (DC at `(h/2, w/2)`). Phase encoding runs along the last (`w`) axis, so
//! sampling masks select ky columns per frame.

pub mod calib;
pub mod mask;
pub mod operators;
pub mod ssdu;
pub mod subspace;

pub use calib::calibrate_sensitivities;
pub use mask::{make_vd_mask, MaskConfig, SamplingMask};
pub use operators::{adjoint_op, apply_mask, fftshift2, forward_op};
pub use ssdu::{ssdu_partition, SsduPartition};
pub use subspace::{estimate_subspace, project_subspace, SubspaceBasis};

use mdr_autodiff::Tensor;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MriError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("infeasible mask: {0}")]
    InfeasibleMask(String),
    #[error("SSDU partition infeasible: {0}")]
    InfeasiblePartition(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("invalid subspace rank {r} for {nt} frames")]
    SubspaceRank { r: usize, nt: usize },
    #[error(transparent)]
    Autodiff(#[from] mdr_autodiff::AdError),
}

pub type Result<T> = std::result::Result<T, MriError>;

/// Everything the reconstruction engine needs about one acquisition.
#[derive(Debug, Clone)]
pub struct AcquisitionBundle {
    /// Measured k-space, complex [nt, nc, h, w], zero where unsampled.
    pub kspace: Tensor,
    pub mask: SamplingMask,
    /// Coil sensitivities, complex [nc, h, w].
    pub sens: Tensor,
    /// Optional pre-estimated temporal basis.
    pub subspace: Option<SubspaceBasis>,
}
