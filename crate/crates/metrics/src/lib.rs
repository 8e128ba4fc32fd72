//! Quantification and image-quality metrics.
//!
//! T1 comes from the linearized vFA regression (S/sin a vs S/tan a, slope =
//! E1), T2 from a magnitude-weighted log-linear fit. Both are exact on
//! noiseless forward-simulated data, which is the module's master
//! round-trip invariant.

pub mod fits;
pub mod quality;

pub use fits::{fit_t1_vfa, fit_t2_mese, t2_metric_mask, ParamMap, T2_METRIC_CUTOFF_MS};
pub use quality::{magnitude_stack, rel_l2_error, ssim, SsimOptions};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("need at least {need} frames, got {got}")]
    TooFewFrames { need: usize, got: usize },
    #[error("reference has zero energy inside the mask")]
    ZeroReference,
    #[error("window {win} exceeds image extent {extent}")]
    WindowTooLarge { win: usize, extent: usize },
}

pub type Result<T> = std::result::Result<T, MetricsError>;
