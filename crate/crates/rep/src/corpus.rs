//! Multicontrast phantom corpora for representation training.

use mdr_autodiff::Tensor;
use mdr_phantom::{
    render_stack, render_tissue_maps, sample_phantom, AcquisitionProtocol, SamplerConfig,
    TissueTable,
};

use crate::{RepError, Result};

/// Rendered multicontrast stacks (complex [nt, h, w]) sharing one protocol.
/// The stack of phantom `i` holds every contrast, so any transfer triplet
/// is a pure indexing operation.
#[derive(Debug, Clone)]
pub struct RepCorpus {
    pub stacks: Vec<Tensor>,
    pub seeds: Vec<u64>,
    pub protocol: AcquisitionProtocol,
    pub h: usize,
    pub w: usize,
}

impl RepCorpus {
    pub fn len(&self) -> usize {
        self.stacks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stacks.is_empty()
    }

    pub fn n_frames(&self) -> usize {
        self.protocol.n_frames()
    }

    /// Complex [h, w] view of frame `t` of sample `i`.
    pub fn frame(&self, i: usize, t: usize) -> Tensor {
        let hw = self.h * self.w;
        Tensor::from_vec(
            &[self.h, self.w],
            mdr_autodiff::Dtype::Complex,
            self.stacks[i].data()[2 * t * hw..2 * (t + 1) * hw].to_vec(),
        )
        .expect("consistent slice")
    }
}

/// Render `n` phantoms seeded `base_seed..base_seed + n`.
pub fn build_corpus(
    n: usize,
    base_seed: u64,
    grid: (usize, usize),
    protocol: &AcquisitionProtocol,
    sampler: &SamplerConfig,
    table: &TissueTable,
) -> Result<RepCorpus> {
    if n == 0 {
        return Err(RepError::Corpus("empty corpus requested".into()));
    }
    let mut stacks = Vec::with_capacity(n);
    let mut seeds = Vec::with_capacity(n);
    for k in 0..n {
        let seed = base_seed + k as u64;
        let spec = sample_phantom(seed, sampler)?;
        let maps = render_tissue_maps(&spec, grid, table)?;
        stacks.push(render_stack(&maps, protocol, seed)?);
        seeds.push(seed);
    }
    Ok(RepCorpus {
        stacks,
        seeds,
        protocol: protocol.clone(),
        h: grid.0,
        w: grid.1,
    })
}
