//! SSDU data partitioning: split acquired lines into a training set (theta)
//! and a held-out loss set (lambda). Central lines always stay in theta.

use mdr_autodiff::rng_from;
use rand::seq::SliceRandom;

use crate::mask::SamplingMask;
use crate::{MriError, Result};

#[derive(Debug, Clone)]
pub struct SsduPartition {
    pub theta: SamplingMask,
    pub lambda: SamplingMask,
    pub rho: f64,
}

/// Draw lambda uniformly from the non-central sampled lines of each frame
/// with fraction `rho`; theta is the complement inside the acquisition mask.
pub fn ssdu_partition(mask: &SamplingMask, rho: f64, seed: u64) -> Result<SsduPartition> {
    if !(0.0 < rho && rho < 1.0) {
        return Err(MriError::InfeasiblePartition(format!(
            "rho {rho} outside (0, 1)"
        )));
    }
    let total_non_central: usize = (0..mask.nt).map(|t| mask.non_central_sampled(t).len()).sum();
    if total_non_central == 0 {
        return Err(MriError::InfeasiblePartition(
            "no non-central sampled lines to hold out".into(),
        ));
    }
    let mut rng = rng_from(seed);
    let mut theta = mask.clone();
    let mut lambda = mask.empty_like();
    for t in 0..mask.nt {
        let mut pool = mask.non_central_sampled(t);
        let n_lambda = (rho * pool.len() as f64).round() as usize;
        pool.shuffle(&mut rng);
        for &ky in pool.iter().take(n_lambda) {
            theta.set(t, ky, false);
            lambda.set(t, ky, true);
        }
    }
    Ok(SsduPartition {
        theta,
        lambda,
        rho,
    })
}
