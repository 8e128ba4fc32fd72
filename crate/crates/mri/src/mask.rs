//! Variable-density random phase-encode masks.

use mdr_autodiff::rng_from;
use rand::Rng;

use crate::{MriError, Result};

/// Per-frame binary ky-line selection, centered layout (DC at ny/2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMask {
    lines: Vec<bool>,
    pub nt: usize,
    pub ny: usize,
    pub n_center: usize,
}

impl SamplingMask {
    pub fn from_lines(lines: Vec<bool>, nt: usize, ny: usize, n_center: usize) -> Self {
        assert_eq!(lines.len(), nt * ny);
        SamplingMask {
            lines,
            nt,
            ny,
            n_center,
        }
    }

    pub fn full(nt: usize, ny: usize) -> Self {
        SamplingMask {
            lines: vec![true; nt * ny],
            nt,
            ny,
            n_center: ny,
        }
    }

    #[inline]
    pub fn is_sampled(&self, t: usize, ky: usize) -> bool {
        self.lines[t * self.ny + ky]
    }

    pub fn set(&mut self, t: usize, ky: usize, v: bool) {
        self.lines[t * self.ny + ky] = v;
    }

    pub fn frame(&self, t: usize) -> &[bool] {
        &self.lines[t * self.ny..(t + 1) * self.ny]
    }

    pub fn count(&self, t: usize) -> usize {
        self.frame(t).iter().filter(|&&v| v).count()
    }

    /// Indices of the always-sampled central block.
    pub fn center_range(&self) -> std::ops::Range<usize> {
        let start = (self.ny - self.n_center) / 2;
        start..start + self.n_center
    }

    pub fn is_central(&self, ky: usize) -> bool {
        self.center_range().contains(&ky)
    }

    /// Sampled, non-central line indices of one frame.
    pub fn non_central_sampled(&self, t: usize) -> Vec<usize> {
        (0..self.ny)
            .filter(|&k| self.is_sampled(t, k) && !self.is_central(k))
            .collect()
    }

    /// An empty mask with the same geometry (used to build partitions).
    pub fn empty_like(&self) -> SamplingMask {
        SamplingMask {
            lines: vec![false; self.nt * self.ny],
            nt: self.nt,
            ny: self.ny,
            n_center: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaskConfig {
    pub af: f64,
    pub n_center: usize,
    /// Gaussian density width; defaults to ny/4 when zero.
    pub sigma: f64,
    /// Share one random draw across frames instead of per-frame draws.
    pub shared_across_frames: bool,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            af: 4.0,
            n_center: 4,
            sigma: 0.0,
            shared_across_frames: false,
        }
    }
}

/// Weighted sampling without replacement: repeatedly draw proportional to
/// the remaining weights.
fn draw_without_replacement(
    weights: &mut [f64],
    candidates: &[usize],
    n: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<usize> {
    let mut picked = Vec::with_capacity(n);
    for _ in 0..n {
        let total: f64 = candidates.iter().map(|&k| weights[k]).sum();
        let mut u = rng.gen_range(0.0..total);
        let mut chosen = None;
        for &k in candidates {
            if weights[k] <= 0.0 {
                continue;
            }
            if u < weights[k] {
                chosen = Some(k);
                break;
            }
            u -= weights[k];
        }
        // floating-point slack: fall back to the last positive-weight line
        let k = chosen.unwrap_or_else(|| {
            *candidates
                .iter()
                .rev()
                .find(|&&k| weights[k] > 0.0)
                .expect("budget <= candidate count")
        });
        weights[k] = 0.0;
        picked.push(k);
    }
    picked
}

/// Gaussian variable-density mask: the central block is always sampled and
/// the remaining per-frame budget `round(ny/af) - n_center` is drawn without
/// replacement with probability proportional to `exp(-dky^2 / (2 sigma^2))`.
pub fn make_vd_mask(ny: usize, nt: usize, cfg: &MaskConfig, seed: u64) -> Result<SamplingMask> {
    if cfg.af < 1.0 {
        return Err(MriError::InfeasibleMask(format!("AF {} < 1", cfg.af)));
    }
    let budget = (ny as f64 / cfg.af).round() as usize;
    if cfg.n_center > budget {
        return Err(MriError::InfeasibleMask(format!(
            "{} central lines exceed the per-frame budget {budget}",
            cfg.n_center
        )));
    }
    let mut mask = SamplingMask {
        lines: vec![false; nt * ny],
        nt,
        ny,
        n_center: cfg.n_center,
    };
    let sigma = if cfg.sigma > 0.0 {
        cfg.sigma
    } else {
        ny as f64 / 4.0
    };
    let center = mask.center_range();
    let candidates: Vec<usize> = (0..ny).filter(|k| !center.contains(k)).collect();
    let base_weights: Vec<f64> = (0..ny)
        .map(|k| {
            let d = k as f64 - ny as f64 / 2.0;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let mut rng = rng_from(seed);
    let n_random = budget - cfg.n_center;
    let mut first_frame_draw: Option<Vec<usize>> = None;
    for t in 0..nt {
        for k in center.clone() {
            mask.set(t, k, true);
        }
        let picked = if cfg.shared_across_frames {
            if let Some(p) = &first_frame_draw {
                p.clone()
            } else {
                let mut w = base_weights.clone();
                let p = draw_without_replacement(&mut w, &candidates, n_random, &mut rng);
                first_frame_draw = Some(p.clone());
                p
            }
        } else {
            let mut w = base_weights.clone();
            draw_without_replacement(&mut w, &candidates, n_random, &mut rng)
        };
        for k in picked {
            mask.set(t, k, true);
        }
    }
    Ok(mask)
}
