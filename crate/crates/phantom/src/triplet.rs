//! Contrast-transfer training triplets.
//!
//! A triplet pairs two rendered images (geometry i with contrast i, geometry
//! j with contrast j) with the cross-composed target: geometry i rendered
//! under contrast j. The target is produced by the same signal path as any
//! other frame, so it is exact by construction.

use crate::geometry::PhantomSpec;
use crate::protocol::AcquisitionProtocol;
use crate::signal::{signal_frame, synth_phase};
use crate::tissue::{render_tissue_maps, TissueTable};
use crate::Result;
use mdr_autodiff::Tensor;

/// (X_{gi,ci}, X_{gj,cj}, X_{gi,cj}) as complex [h, w] frames.
#[derive(Debug, Clone)]
pub struct TransferTriplet {
    pub geom_source: Tensor,
    pub contrast_source: Tensor,
    pub target: Tensor,
}

pub fn make_transfer_triplet(
    spec_i: &PhantomSpec,
    spec_j: &PhantomSpec,
    contrast_i: usize,
    contrast_j: usize,
    protocol: &AcquisitionProtocol,
    grid: (usize, usize),
    table: &TissueTable,
) -> Result<TransferTriplet> {
    let maps_i = render_tissue_maps(spec_i, grid, table)?;
    let maps_j = render_tissue_maps(spec_j, grid, table)?;
    let phase_i = synth_phase(grid, spec_i.seed);
    let phase_j = synth_phase(grid, spec_j.seed);
    Ok(TransferTriplet {
        geom_source: signal_frame(&maps_i, protocol, contrast_i, Some(&phase_i))?,
        contrast_source: signal_frame(&maps_j, protocol, contrast_j, Some(&phase_j))?,
        target: signal_frame(&maps_i, protocol, contrast_j, Some(&phase_i))?,
    })
}
