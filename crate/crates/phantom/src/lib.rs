//! Synthetic multicontrast brain-like phantoms with known tissue parameters.
//!
//! Geometry is a painter's-order list of ellipses in normalized [-1,1]
//! coordinates; tissue classes map to (PD, T1, T2) triples; SPGR and MESE
//! signal equations turn tissue maps into multicontrast complex image
//! stacks, stored as `[n_frames, h, w]` complex tensors.

pub mod geometry;
pub mod protocol;
pub mod sensitivity;
pub mod signal;
pub mod tissue;
pub mod triplet;

pub use geometry::{sample_phantom, EllipseRegion, PhantomSpec, SamplerConfig};
pub use protocol::AcquisitionProtocol;
pub use sensitivity::{simulate_sensitivities, CoilModel};
pub use signal::{mese_signal, render_stack, signal_frame, spgr_signal, synth_phase};
pub use tissue::{render_tissue_maps, TissueMaps, TissueParams, TissueTable};
pub use triplet::{make_transfer_triplet, TransferTriplet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("degenerate sampler config: {0}")]
    BadConfig(String),
    #[error("unknown tissue class id {0}")]
    UnknownClass(u8),
    #[error("invalid tissue table: {0}")]
    BadTable(String),
    #[error("protocol mismatch: {0}")]
    ProtocolMismatch(String),
    #[error("nonpositive {what} inside support at voxel {voxel}")]
    NonPositiveParam { what: &'static str, voxel: usize },
    #[error("contrast index {idx} out of range for {n_frames} frames")]
    ContrastIndex { idx: usize, n_frames: usize },
}

pub type Result<T> = std::result::Result<T, PhantomError>;
